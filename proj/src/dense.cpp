#include "glms/dense.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "glms/errors.hpp"
#include "glms/kernels.hpp"

namespace glms {

SymEig sym_eig(const double* m_mat, int n) {
  SymEig e;
  e.n = n;
  e.eigval.assign(n, 0.0);
  e.vt.assign(std::size_t(n) * n, 0.0);

  std::vector<double> a(m_mat, m_mat + std::size_t(n) * n);
  std::vector<double> v(std::size_t(n) * n, 0.0);
  for (int i = 0; i < n; ++i) v[std::size_t(i) * n + i] = 1.0;

  auto off_norm = [&]() {
    double s = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j) s += a[std::size_t(i) * n + j] * a[std::size_t(i) * n + j];
    return s;
  };

  double norm = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) norm += a[std::size_t(i) * n + j] * a[std::size_t(i) * n + j];
  const double tol = 1e-30 * std::max(norm, 1e-300);

  // cyclic Jacobi sweeps
  for (int sweep = 0; sweep < 64 && off_norm() > tol; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a[std::size_t(p) * n + q];
        if (apq == 0.0) continue;
        const double app = a[std::size_t(p) * n + p];
        const double aqq = a[std::size_t(q) * n + q];
        const double tau = (aqq - app) / (2.0 * apq);
        const double t = (tau >= 0.0)
                             ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                             : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a[std::size_t(k) * n + p];
          const double akq = a[std::size_t(k) * n + q];
          a[std::size_t(k) * n + p] = c * akp - s * akq;
          a[std::size_t(k) * n + q] = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a[std::size_t(p) * n + k];
          const double aqk = a[std::size_t(q) * n + k];
          a[std::size_t(p) * n + k] = c * apk - s * aqk;
          a[std::size_t(q) * n + k] = s * apk + c * aqk;
        }
        for (int k = 0; k < n; ++k) {
          const double vkp = v[std::size_t(k) * n + p];
          const double vkq = v[std::size_t(k) * n + q];
          v[std::size_t(k) * n + p] = c * vkp - s * vkq;
          v[std::size_t(k) * n + q] = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int x, int y) {
    return a[std::size_t(x) * n + x] > a[std::size_t(y) * n + y];
  });
  for (int k = 0; k < n; ++k) {
    const int src = order[k];
    e.eigval[k] = a[std::size_t(src) * n + src];
    for (int i = 0; i < n; ++i) e.vt[std::size_t(k) * n + i] = v[std::size_t(i) * n + src];
  }
  return e;
}

bool cholesky(const double* m_mat, int n, std::vector<double>& l_out) {
  l_out.assign(std::size_t(n) * n, 0.0);
  double max_diag = 0.0;
  for (int i = 0; i < n; ++i)
    max_diag = std::max(max_diag, std::abs(m_mat[std::size_t(i) * n + i]));
  const double floor = 1e-13 * std::max(max_diag, 1e-300);
  for (int j = 0; j < n; ++j) {
    double d = m_mat[std::size_t(j) * n + j] -
               kern::sumsq(l_out.data() + std::size_t(j) * n, j);
    if (!(d > floor)) return false;
    d = std::sqrt(d);
    l_out[std::size_t(j) * n + j] = d;
    for (int i = j + 1; i < n; ++i) {
      const double s = m_mat[std::size_t(i) * n + j] -
                       kern::dot(l_out.data() + std::size_t(i) * n,
                                 l_out.data() + std::size_t(j) * n, j);
      l_out[std::size_t(i) * n + j] = s / d;
    }
  }
  return true;
}

void solve_lower(const std::vector<double>& l, int n, const double* b,
                 double* x) {
  for (int i = 0; i < n; ++i) {
    const double s = kern::dot(l.data() + std::size_t(i) * n, x, i);
    x[i] = (b[i] - s) / l[std::size_t(i) * n + i];
  }
}

void solve_lower_t(const std::vector<double>& l, int n, const double* b,
                   double* x) {
  for (int i = n - 1; i >= 0; --i) {
    double s = b[i];
    for (int k = i + 1; k < n; ++k) s -= l[std::size_t(k) * n + i] * x[k];
    x[i] = s / l[std::size_t(i) * n + i];
  }
}

GramFactorization::GramFactorization(std::vector<double> m_mat, int n)
    : n_(n), m_(std::move(m_mat)) {
  if (int64_t(m_.size()) != int64_t(n) * n)
    throw config_error("gram: matrix size mismatch");
  chol_ok_ = cholesky(m_.data(), n_, l_);
  if (chol_ok_) {
    rank_ = n_;
  } else {
    ensure_eig();
    const double cut = kRankCutoff * std::max(eig_.eigval.empty() ? 0.0 : eig_.eigval[0], 0.0);
    rank_ = 0;
    for (double lam : eig_.eigval)
      if (lam > cut && lam > 0.0) ++rank_;
  }
}

void GramFactorization::ensure_eig() const {
  if (!have_eig_) {
    eig_ = sym_eig(m_.data(), n_);
    have_eig_ = true;
  }
}

double GramFactorization::quad_pinv(const double* a) const {
  if (chol_ok_) {
    std::vector<double> y(n_);
    solve_lower(l_, n_, a, y.data());
    return kern::sumsq(y.data(), n_);
  }
  ensure_eig();
  const double cut = kRankCutoff * std::max(eig_.eigval[0], 0.0);
  double s = 0.0;
  for (int k = 0; k < n_; ++k) {
    const double lam = eig_.eigval[k];
    if (lam <= cut || lam <= 0.0) continue;
    const double c = kern::dot(eig_.vt.data() + std::size_t(k) * n_, a, n_);
    s += c * c / lam;
  }
  return s;
}

void GramFactorization::solve_pinv(const double* b, double* x) const {
  if (chol_ok_) {
    std::vector<double> y(n_);
    solve_lower(l_, n_, b, y.data());
    solve_lower_t(l_, n_, y.data(), x);
    return;
  }
  ensure_eig();
  const double cut = kRankCutoff * std::max(eig_.eigval[0], 0.0);
  std::fill(x, x + n_, 0.0);
  for (int k = 0; k < n_; ++k) {
    const double lam = eig_.eigval[k];
    if (lam <= cut || lam <= 0.0) continue;
    const double c = kern::dot(eig_.vt.data() + std::size_t(k) * n_, b, n_) / lam;
    kern::axpy(c, eig_.vt.data() + std::size_t(k) * n_, x, n_);
  }
}

void GramFactorization::apply_pinv_sqrt(const double* a, double* out) const {
  ensure_eig();
  const double cut = kRankCutoff * std::max(eig_.eigval[0], 0.0);
  std::fill(out, out + n_, 0.0);
  for (int k = 0; k < n_; ++k) {
    const double lam = eig_.eigval[k];
    if (lam <= cut || lam <= 0.0) continue;
    const double c = kern::dot(eig_.vt.data() + std::size_t(k) * n_, a, n_) / std::sqrt(lam);
    kern::axpy(c, eig_.vt.data() + std::size_t(k) * n_, out, n_);
  }
}

void GramFactorization::whiten(const double* a, double* out) const {
  if (chol_ok_) {
    solve_lower(l_, n_, a, out);
    return;
  }
  apply_pinv_sqrt(a, out);
}

void GramFactorization::whiten_gaussian(const double* a, double* out) const {
  // L^{-1} g has covariance (L^T L)^{-1}, not M^{-1}; the transpose solve
  // gives cov(L^{-T} g) = L^{-T} L^{-1} = M^{-1}.
  if (chol_ok_) {
    solve_lower_t(l_, n_, a, out);
    return;
  }
  apply_pinv_sqrt(a, out);
}

double GramFactorization::reconstruction_error() const {
  ensure_eig();
  double num = 0.0, den = 0.0;
  std::vector<double> col(n_);
  for (int i = 0; i < n_; ++i) {
    for (int j = 0; j < n_; ++j) {
      double r = 0.0;
      for (int k = 0; k < n_; ++k)
        r += eig_.eigval[k] * eig_.vt[std::size_t(k) * n_ + i] * eig_.vt[std::size_t(k) * n_ + j];
      const double d = r - m_[std::size_t(i) * n_ + j];
      num += d * d;
      den += m_[std::size_t(i) * n_ + j] * m_[std::size_t(i) * n_ + j];
    }
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

}  // namespace glms
