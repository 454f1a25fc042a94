#include "glms/instance.hpp"

#include <cmath>

#include "glms/errors.hpp"
#include "glms/kernels.hpp"

namespace glms {

RowMatrix::RowMatrix(int m, int n, std::vector<double> data)
    : m_(m), n_(n), data_(std::move(data)) {
  if (m < 1 || n < 1) throw config_error("matrix needs m >= 1, n >= 1");
  if (data_.size() != std::size_t(m) * n)
    throw config_error("matrix data size mismatch");
  for (double v : data_)
    if (!std::isfinite(v)) throw config_error("matrix entries must be finite");
}

double RowMatrix::row_norm(int i) const {
  return std::sqrt(kern::sumsq(row_ptr(i), n_));
}

bool RowMatrix::has_zero_row() const {
  for (int i = 0; i < m_; ++i)
    if (kern::sumsq(row_ptr(i), n_) == 0.0) return true;
  return false;
}

RowMatrix RowMatrix::select_rows(std::span<const int> idx) const {
  std::vector<double> out;
  out.reserve(idx.size() * n_);
  for (int i : idx)
    out.insert(out.end(), row_ptr(i), row_ptr(i) + n_);
  return RowMatrix(int(idx.size()), n_, std::move(out));
}

bool ProblemInstance::shifted() const {
  for (double v : b)
    if (v != 0.0) return true;
  return false;
}

void ProblemInstance::validate() const {
  if (!b.empty() && int(b.size()) != A.rows())
    throw config_error("shift vector length does not match row count");
  for (double v : b)
    if (!std::isfinite(v)) throw config_error("shifts must be finite");
  if (A.has_zero_row()) throw config_error("zero rows are not allowed");
}

std::vector<double> ProblemInstance::residuals(std::span<const double> x) const {
  if (int(x.size()) != A.cols()) throw config_error("x dimension mismatch");
  std::vector<double> z(A.rows());
  kern::matvec(A.data().data(), A.rows(), A.cols(), x.data(), z.data());
  if (!b.empty())
    for (int i = 0; i < A.rows(); ++i) z[i] -= b[i];
  return z;
}

double ProblemInstance::value_from_residuals(std::span<const double> z) const {
  double s = 0.0;
  for (int i = 0; i < int(z.size()); ++i) s += family.value(i, z[i]);
  return s;
}

double ProblemInstance::value(std::span<const double> x) const {
  return value_from_residuals(residuals(x));
}

std::vector<double> ProblemInstance::gradient(std::span<const double> x) const {
  const std::vector<double> z = residuals(x);
  std::vector<double> g(A.cols(), 0.0);
  for (int i = 0; i < A.rows(); ++i)
    kern::axpy(family.deriv(i, z[i]), A.row_ptr(i), g.data(), A.cols());
  return g;
}

ProblemInstance lift_shift(const ProblemInstance& inst) {
  const int m = inst.m(), n = inst.n();
  std::vector<double> data;
  data.reserve(std::size_t(m) * (n + 1));
  for (int i = 0; i < m; ++i) {
    data.insert(data.end(), inst.A.row_ptr(i), inst.A.row_ptr(i) + n);
    data.push_back(inst.b.empty() ? 0.0 : inst.b[i]);
  }
  ProblemInstance out{RowMatrix(m, n + 1, std::move(data)), {}, inst.family};
  return out;
}

}  // namespace glms
