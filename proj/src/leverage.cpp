#include "glms/leverage.hpp"

#include <algorithm>
#include <cmath>

#include "glms/errors.hpp"
#include "glms/kernels.hpp"
#include "glms/rng.hpp"

namespace glms {

GramFactorization gram(const RowMatrix& a_mat, std::span<const double> w) {
  const int m = a_mat.rows(), n = a_mat.cols();
  if (int(w.size()) != m) throw config_error("gram: weight length mismatch");
  std::vector<double> mw(std::size_t(n) * n, 0.0);
  for (int i = 0; i < m; ++i) {
    if (w[i] < 0.0) throw config_error("gram: negative weight");
    if (w[i] == 0.0) continue;
    kern::rank1_upper(mw.data(), a_mat.row_ptr(i), w[i], n);
  }
  kern::sym_mirror_lower(mw.data(), n);
  return GramFactorization(std::move(mw), n);
}

LeverageResult leverage_exact(const RowMatrix& a_mat,
                              std::span<const double> w) {
  const int m = a_mat.rows(), n = a_mat.cols();
  const GramFactorization f = gram(a_mat, w);
  LeverageResult r;
  r.rank = f.rank();
  r.sigma.resize(m);
  r.tau.resize(m);
  std::vector<double> y(n);
  for (int i = 0; i < m; ++i) {
    f.whiten(a_mat.row_ptr(i), y.data());
    const double tau = kern::sumsq(y.data(), n);
    r.tau[i] = tau;
    r.sigma[i] = std::clamp(w[i] * tau, 0.0, 1.0);
  }
  return r;
}

std::size_t sketch_rows(int m, double eps) {
  constexpr double kDeltaFail = 1e-6;
  return std::size_t(std::ceil(40.0 / (eps * eps) * std::log(double(m) / kDeltaFail)));
}

std::vector<double> leverage_sketch(const RowMatrix& a_mat,
                                    std::span<const double> w, double eps,
                                    uint64_t seed) {
  if (!(eps > 0.0) || eps > 1.0 / 3.0)
    throw config_error("leverage sketch needs eps in (0, 1/3]");
  const int m = a_mat.rows(), n = a_mat.cols();
  if (int(w.size()) != m) throw config_error("leverage: weight length mismatch");

  const GramFactorization f = gram(a_mat, w);
  const std::size_t k = sketch_rows(m, eps);

  // Rows of S with row covariance M^{-1/2} . M^{-1/2}, so that
  // sigma~_i = (w_i / k) ||S a_i||^2 estimates w_i a_i^T M^{-1} a_i.
  SplitRng rng = SplitRng(seed).split(0x6c657653ull);
  std::vector<double> g(n), s(k * std::size_t(n));
  for (std::size_t r = 0; r < k; ++r) {
    for (int j = 0; j < n; ++j) g[j] = rng.next_gaussian();
    f.whiten_gaussian(g.data(), s.data() + r * n);
  }

  std::vector<double> sigma(m), proj(k);
  for (int i = 0; i < m; ++i) {
    kern::matvec(s.data(), k, n, a_mat.row_ptr(i), proj.data());
    sigma[i] = w[i] * kern::sumsq(proj.data(), k) / double(k);
  }
  return sigma;
}

std::vector<double> leverage_auto(const RowMatrix& a_mat,
                                  std::span<const double> w, double eps,
                                  uint64_t seed) {
  if (eps == 0.0) return leverage_exact(a_mat, w).sigma;
  if (sketch_rows(a_mat.rows(), eps) < std::size_t(a_mat.cols()))
    return leverage_sketch(a_mat, w, eps, seed);
  return leverage_exact(a_mat, w).sigma;
}

}  // namespace glms
