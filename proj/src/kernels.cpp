#include "glms/kernels.hpp"

#include <cstdlib>
#include <cstring>

#include "glms/errors.hpp"

namespace glms::kern {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

double sumsq(const double* a, std::size_t n) { return dot(a, a, n); }

void matvec(const double* a, std::size_t m, std::size_t n, const double* x,
            double* y) {
  for (std::size_t i = 0; i < m; ++i) y[i] = dot(a + i * n, x, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void rank1_upper(double* m_mat, const double* a, double w, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const double wa = w * a[i];
    if (wa == 0.0) continue;
    double* row = m_mat + i * n;
    for (std::size_t j = i; j < n; ++j) row[j] += wa * a[j];
  }
}

}  // namespace scalar

#if defined(__x86_64__)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
double sumsq(const double* a, std::size_t n);
void matvec(const double* a, std::size_t m, std::size_t n, const double* x,
            double* y);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void rank1_upper(double* m_mat, const double* a, double w, std::size_t n);
}  // namespace avx2
#endif

namespace {

struct Table {
  double (*dot)(const double*, const double*, std::size_t);
  double (*sumsq)(const double*, std::size_t);
  void (*matvec)(const double*, std::size_t, std::size_t, const double*,
                 double*);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*rank1_upper)(double*, const double*, double, std::size_t);
};

constexpr Table kScalar = {scalar::dot, scalar::sumsq, scalar::matvec,
                           scalar::axpy, scalar::rank1_upper};

#if defined(__x86_64__)
constexpr Table kAvx2 = {avx2::dot, avx2::sumsq, avx2::matvec, avx2::axpy,
                         avx2::rank1_upper};
#endif

bool avx2_available() {
#if defined(__x86_64__)
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend pick_initial() {
  if (const char* env = std::getenv("GLMS_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_available()) return Backend::avx2;
  }
  return avx2_available() ? Backend::avx2 : Backend::scalar;
}

Backend g_backend = pick_initial();

const Table& table() {
#if defined(__x86_64__)
  if (g_backend == Backend::avx2) return kAvx2;
#endif
  return kScalar;
}

}  // namespace

Backend active() { return g_backend; }

const char* name(Backend b) {
  return b == Backend::avx2 ? "avx2" : "scalar";
}

bool supported(Backend b) {
  return b == Backend::scalar || avx2_available();
}

void force(Backend b) {
  if (!supported(b)) throw config_error("kernel backend not supported on this CPU");
  g_backend = b;
}

double dot(const double* a, const double* b, std::size_t n) {
  return table().dot(a, b, n);
}

double sumsq(const double* a, std::size_t n) { return table().sumsq(a, n); }

void matvec(const double* a, std::size_t m, std::size_t n, const double* x,
            double* y) {
  table().matvec(a, m, n, x, y);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  table().axpy(alpha, x, y, n);
}

void rank1_upper(double* m_mat, const double* a, double w, std::size_t n) {
  table().rank1_upper(m_mat, a, w, n);
}

void sym_mirror_lower(double* m_mat, std::size_t n) {
  for (std::size_t i = 1; i < n; ++i)
    for (std::size_t j = 0; j < i; ++j) m_mat[i * n + j] = m_mat[j * n + i];
}

}  // namespace glms::kern
