#pragma once

#include <span>
#include <vector>

namespace glms {

// Eigendecomposition of a symmetric matrix.  vt is row-major with
// eigenvector k stored as row k, so V^T x is a plain matvec.
struct SymEig {
  int n = 0;
  std::vector<double> eigval;  // descending
  std::vector<double> vt;
};

SymEig sym_eig(const double* m_mat, int n);

// Lower-triangular Cholesky of a symmetric matrix, row-major output.
// Returns false when the matrix is not (numerically) positive definite.
bool cholesky(const double* m_mat, int n, std::vector<double>& l_out);

// Factorization of a PSD Gram matrix M = sum_i w_i a_i a_i^T with a
// pseudo-inverse path for rank-deficient inputs.  Cholesky is the fast path;
// singular values below kRankCutoff * lambda_max count as zero.
class GramFactorization {
 public:
  static constexpr double kRankCutoff = 1e-12;

  GramFactorization() = default;
  GramFactorization(std::vector<double> m_mat, int n);

  int dim() const { return n_; }
  int rank() const { return rank_; }
  const std::vector<double>& matrix() const { return m_; }

  // a^T M^+ a
  double quad_pinv(const double* a) const;
  // x = M^+ b
  void solve_pinv(const double* b, double* x) const;
  // out = M^{+1/2} a (symmetric square root; eigen path)
  void apply_pinv_sqrt(const double* a, double* out) const;
  // out such that ||out||_2^2 = a^T M^+ a using whichever factor exists
  void whiten(const double* a, double* out) const;
  // out with covariance M^+ when a is standard Gaussian: out = L^{-T} a on
  // the Cholesky path, M^{+1/2} a otherwise
  void whiten_gaussian(const double* a, double* out) const;

  // Frobenius distance between M and its refactored form, relative.
  double reconstruction_error() const;

 private:
  void ensure_eig() const;

  int n_ = 0;
  int rank_ = 0;
  bool chol_ok_ = false;
  std::vector<double> m_;
  std::vector<double> l_;
  mutable SymEig eig_;
  mutable bool have_eig_ = false;
};

// Forward/back substitution with the lower factor L (row-major).
void solve_lower(const std::vector<double>& l, int n, const double* b,
                 double* x);
void solve_lower_t(const std::vector<double>& l, int n, const double* b,
                   double* x);

}  // namespace glms
