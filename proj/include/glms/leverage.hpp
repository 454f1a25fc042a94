#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "glms/dense.hpp"
#include "glms/instance.hpp"

namespace glms {

GramFactorization gram(const RowMatrix& a_mat, std::span<const double> w);

struct LeverageResult {
  std::vector<double> sigma;  // sigma_i = w_i a_i^T M_w^+ a_i, in [0,1]
  std::vector<double> tau;    // tau_i = a_i^T M_w^+ a_i
  int rank = 0;
};

LeverageResult leverage_exact(const RowMatrix& a_mat, std::span<const double> w);

// (1+eps)-approximate leverage scores via a Gaussian sketch with
// k = ceil(40 eps^-2 ln(m / delta_fail)) rows, delta_fail = 1e-6.
std::vector<double> leverage_sketch(const RowMatrix& a_mat,
                                    std::span<const double> w, double eps,
                                    uint64_t seed);

// eps == 0 selects the exact path.  For eps > 0 the sketch is used only when
// its row count k is below n, i.e. when it is actually cheaper than one exact
// whitening pass per row; otherwise exact scores trivially satisfy the
// (1+eps) contract.
std::vector<double> leverage_auto(const RowMatrix& a_mat,
                                  std::span<const double> w, double eps,
                                  uint64_t seed);

std::size_t sketch_rows(int m, double eps);

}  // namespace glms
