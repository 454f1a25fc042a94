#pragma once

#include <cmath>
#include <cstdint>

namespace glms {

// Counter-based generator: every output is a hash of (key, counter), and
// child streams are derived by hashing the key with a stream id.  Sequences
// depend only on (seed, stream, counter), never on thread scheduling.
class SplitRng {
 public:
  explicit SplitRng(uint64_t seed) : key_(mix(seed ^ 0x9e3779b97f4a7c15ull)) {}

  SplitRng split(uint64_t stream) const {
    SplitRng r(0);
    r.key_ = mix(key_ ^ mix(stream + 0x632be59bd9b4e019ull));
    r.ctr_ = 0;
    r.have_spare_ = false;
    return r;
  }

  uint64_t next_u64() { return mix(key_ ^ (0x9e3779b97f4a7c15ull * ++ctr_)); }

  // uniform in [0, 1)
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // standard normal (Marsaglia polar, spare cached)
  double next_gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double k = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * k;
    have_spare_ = true;
    return u * k;
  }

  static uint64_t mix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ull;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebull;
    z ^= z >> 31;
    return z;
  }

 private:
  uint64_t key_;
  uint64_t ctr_ = 0;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace glms
