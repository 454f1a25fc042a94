#pragma once

#include <span>
#include <vector>

#include "glms/loss.hpp"

namespace glms {

// Dense row-major matrix of term vectors a_1..a_m.
class RowMatrix {
 public:
  RowMatrix() = default;
  RowMatrix(int m, int n, std::vector<double> data);

  int rows() const { return m_; }
  int cols() const { return n_; }
  std::span<const double> row(int i) const {
    return {data_.data() + std::size_t(i) * n_, std::size_t(n_)};
  }
  const double* row_ptr(int i) const { return data_.data() + std::size_t(i) * n_; }
  const std::vector<double>& data() const { return data_; }

  double row_norm(int i) const;
  bool has_zero_row() const;
  RowMatrix select_rows(std::span<const int> idx) const;

 private:
  int m_ = 0, n_ = 0;
  std::vector<double> data_;
};

// F(x) = sum_i f_i(<a_i, x> - b_i); b empty means zero shifts.
struct ProblemInstance {
  RowMatrix A;
  std::vector<double> b;
  LossFamily family;

  int m() const { return A.rows(); }
  int n() const { return A.cols(); }
  bool shifted() const;
  void validate() const;  // dimensions, zero rows

  // residuals z_i = <a_i, x> - b_i
  std::vector<double> residuals(std::span<const double> x) const;
  double value(std::span<const double> x) const;
  double value_from_residuals(std::span<const double> z) const;
  std::vector<double> gradient(std::span<const double> x) const;
};

// Re-encode shifts into an extra coordinate: rows (a_i, b_i), b = 0.
// Evaluating the lifted instance at (x, -1) matches the original at x.
ProblemInstance lift_shift(const ProblemInstance& inst);

}  // namespace glms
