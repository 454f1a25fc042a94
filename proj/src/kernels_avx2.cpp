// AVX2/FMA kernel variants.  This translation unit is compiled with
// -mavx2 -mfma; entry happens only after the runtime CPU check in
// kernels.cpp.

#if defined(__x86_64__)

#include <immintrin.h>

#include <cstddef>

namespace glms::kern::avx2 {

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4),
                           acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  acc0 = _mm256_add_pd(acc0, acc1);
  __m128d lo = _mm256_castpd256_pd128(acc0);
  __m128d hi = _mm256_extractf128_pd(acc0, 1);
  lo = _mm_add_pd(lo, hi);
  double s = _mm_cvtsd_f64(_mm_add_sd(lo, _mm_unpackhi_pd(lo, lo)));
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

double sumsq(const double* a, std::size_t n) { return dot(a, a, n); }

void matvec(const double* a, std::size_t m, std::size_t n, const double* x,
            double* y) {
  for (std::size_t i = 0; i < m; ++i) y[i] = dot(a + i * n, x, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void rank1_upper(double* m_mat, const double* a, double w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double wa = w * a[i];
    if (wa == 0.0) continue;
    double* row = m_mat + i * n;
    const __m256d vwa = _mm256_set1_pd(wa);
    std::size_t j = i;
    for (; j + 4 <= n; j += 4) {
      __m256d vr = _mm256_loadu_pd(row + j);
      vr = _mm256_fmadd_pd(vwa, _mm256_loadu_pd(a + j), vr);
      _mm256_storeu_pd(row + j, vr);
    }
    for (; j < n; ++j) row[j] += wa * a[j];
  }
}

}  // namespace glms::kern::avx2

#endif  // __x86_64__
