#pragma once

// Test-only oracles, kept independent of the library paths they check.

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <vector>

#include "glms/dense.hpp"
#include "glms/instance.hpp"
#include "glms/kernels.hpp"
#include "glms/rng.hpp"

namespace testref {

// Composite Simpson quadrature of int_0^d (d - t) h''(z0 + t) dt for the
// threshold-form loss with exponent p and threshold t0, splitting at the
// curvature kinks |z| = t0.
inline double simpson_divergence(double p, double t0, double z0, double d,
                                 int panels_per_piece = 4000) {
  auto second = [&](double z) {
    const double az = std::abs(z);
    if (az <= t0) return p * std::pow(t0, p - 2.0);
    return p * (p - 1.0) * std::pow(az, p - 2.0);
  };
  // kink locations along z0 + t for t in [0, d]
  std::vector<double> cuts{0.0, d};
  for (double kink : {t0 - z0, -t0 - z0}) {
    if ((d > 0 && kink > 0 && kink < d) || (d < 0 && kink < 0 && kink > d))
      cuts.push_back(kink);
  }
  std::sort(cuts.begin(), cuts.end());
  if (d < 0) std::reverse(cuts.begin(), cuts.end());

  double total = 0.0;
  for (std::size_t s = 0; s + 1 < cuts.size(); ++s) {
    const double a = cuts[s], b = cuts[s + 1];
    const int n2 = 2 * panels_per_piece;
    const double h = (b - a) / n2;
    if (h == 0.0) continue;
    auto f = [&](double t) { return (d - t) * second(z0 + t); };
    // piece endpoints sit exactly on curvature kinks; sample just inside
    const double nudge = (b - a) * 1e-13;
    double acc = f(a + nudge) + f(b - nudge);
    for (int k = 1; k < n2; ++k) acc += f(a + h * k) * (k % 2 ? 4.0 : 2.0);
    total += acc * h / 3.0;
  }
  return total;
}

// Damped Newton on F(x) = sum_i |<a_i,x> - b_i|^p, written against the raw
// arrays so it shares nothing with the library solver.  Returns the final
// objective; gap_out receives a Newton-decrement-based optimality estimate.
inline std::vector<double> newton_lp_reference(const glms::RowMatrix& a_mat,
                                               const std::vector<double>& b,
                                               double p, int iters,
                                               double* gap_out = nullptr) {
  const int m = a_mat.rows(), n = a_mat.cols();
  std::vector<double> x(n, 0.0), z(m), g(n), d(n), h(std::size_t(n) * n);
  auto eval = [&](const std::vector<double>& xx, std::vector<double>& zz) {
    glms::kern::matvec(a_mat.data().data(), m, n, xx.data(), zz.data());
    double f = 0.0;
    for (int i = 0; i < m; ++i) {
      if (!b.empty()) zz[i] -= b[i];
      f += std::pow(std::abs(zz[i]), p);
    }
    return f;
  };
  double f = eval(x, z);
  double decrement = 0.0;
  for (int it = 0; it < iters; ++it) {
    std::fill(g.begin(), g.end(), 0.0);
    double zmax = 0.0;
    for (int i = 0; i < m; ++i) zmax = std::max(zmax, std::abs(z[i]));
    const double zeps = 1e-9 * (1.0 + zmax);
    std::fill(h.begin(), h.end(), 0.0);
    for (int i = 0; i < m; ++i) {
      const double az = std::max(std::abs(z[i]), zeps);
      const double sg = z[i] < 0 ? -1.0 : 1.0;
      glms::kern::axpy(p * std::pow(az, p - 1.0) * sg, a_mat.row_ptr(i),
                       g.data(), n);
      glms::kern::rank1_upper(h.data(), a_mat.row_ptr(i),
                              p * (p - 1.0) * std::pow(az, p - 2.0), n);
    }
    glms::kern::sym_mirror_lower(h.data(), n);
    double tr = 0.0;
    for (int j = 0; j < n; ++j) tr += h[std::size_t(j) * n + j];
    for (int j = 0; j < n; ++j) h[std::size_t(j) * n + j] += 1e-14 * tr / n;
    glms::GramFactorization hf(h, n);
    std::vector<double> ng(g);
    for (double& v : ng) v = -v;
    hf.solve_pinv(ng.data(), d.data());
    decrement = -glms::kern::dot(g.data(), d.data(), n);
    if (!(decrement > 0)) break;
    double t = 1.0;
    std::vector<double> xt(n), zt(m);
    bool ok = false;
    for (int bt = 0; bt < 60; ++bt) {
      xt = x;
      glms::kern::axpy(t, d.data(), xt.data(), n);
      const double ft = eval(xt, zt);
      if (ft < f) {
        x.swap(xt);
        z.swap(zt);
        f = ft;
        ok = true;
        break;
      }
      t *= 0.5;
    }
    if (!ok) break;
    if (decrement < 1e-13 * (1.0 + f)) break;
  }
  if (gap_out) *gap_out = 0.5 * decrement;
  return x;
}

// Projected Newton for min ||y||_q^q s.t. A^T y = c (KKT elimination).
inline std::vector<double> dual_reference(const glms::RowMatrix& a_mat,
                                          const std::vector<double>& c,
                                          double q, int iters = 200) {
  const int m = a_mat.rows(), n = a_mat.cols();
  // feasible start: least-norm solution of A^T y = c
  std::vector<double> ones(m, 1.0);
  std::vector<double> gm(std::size_t(n) * n, 0.0);
  for (int i = 0; i < m; ++i)
    glms::kern::rank1_upper(gm.data(), a_mat.row_ptr(i), 1.0, n);
  glms::kern::sym_mirror_lower(gm.data(), n);
  glms::GramFactorization gf(gm, n);
  std::vector<double> u(n);
  gf.solve_pinv(c.data(), u.data());
  std::vector<double> y(m);
  for (int i = 0; i < m; ++i) y[i] = glms::kern::dot(a_mat.row_ptr(i), u.data(), n);

  auto obj = [&](const std::vector<double>& yy) {
    double s = 0.0;
    for (double v : yy) s += std::pow(std::abs(v), q);
    return s;
  };
  double f = obj(y);
  for (int it = 0; it < iters; ++it) {
    // newton step within the affine subspace: d = -H^{-1}(g + A lambda),
    // lambda from A^T H^{-1} A lambda = -A^T H^{-1} g
    std::vector<double> g(m), hinv(m);
    double ymax = 0.0;
    for (double v : y) ymax = std::max(ymax, std::abs(v));
    const double yeps = 1e-9 * (1.0 + ymax);
    for (int i = 0; i < m; ++i) {
      const double ay = std::max(std::abs(y[i]), yeps);
      g[i] = q * std::pow(ay, q - 1.0) * (y[i] < 0 ? -1.0 : 1.0);
      hinv[i] = 1.0 / (q * (q - 1.0) * std::pow(ay, q - 2.0));
    }
    std::vector<double> kkt(std::size_t(n) * n, 0.0), rhs(n, 0.0), lam(n);
    for (int i = 0; i < m; ++i) {
      glms::kern::rank1_upper(kkt.data(), a_mat.row_ptr(i), hinv[i], n);
      glms::kern::axpy(-hinv[i] * g[i], a_mat.row_ptr(i), rhs.data(), n);
    }
    glms::kern::sym_mirror_lower(kkt.data(), n);
    glms::GramFactorization kf(kkt, n);
    kf.solve_pinv(rhs.data(), lam.data());
    std::vector<double> d(m);
    double dec = 0.0;
    for (int i = 0; i < m; ++i) {
      d[i] = -hinv[i] * (g[i] + glms::kern::dot(a_mat.row_ptr(i), lam.data(), n));
      dec -= g[i] * d[i];
    }
    if (!(dec > 1e-15 * (1.0 + f))) break;
    double t = 1.0;
    bool ok = false;
    for (int bt = 0; bt < 60; ++bt) {
      std::vector<double> yt(y);
      for (int i = 0; i < m; ++i) yt[i] += t * d[i];
      const double ft = obj(yt);
      if (ft < f) {
        y.swap(yt);
        f = ft;
        ok = true;
        break;
      }
      t *= 0.5;
    }
    if (!ok) break;
  }
  return y;
}

inline glms::RowMatrix random_matrix(int m, int n, uint64_t seed) {
  glms::SplitRng rng(seed);
  std::vector<double> d(std::size_t(m) * n);
  for (double& v : d) v = rng.next_gaussian();
  return glms::RowMatrix(m, n, std::move(d));
}

}  // namespace testref
