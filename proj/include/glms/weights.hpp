#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "glms/instance.hpp"
#include "glms/leverage.hpp"

namespace glms {

// d(u, w) = max_i |log(u_i / w_i)|; infinite when zero patterns differ.
double log_ratio_dist(std::span<const double> u, std::span<const double> w);

// One step of the scale-s reweighting: w_i -> f_i(sqrt(tau_i)) / (s tau_i)
// with tau_i = sigma_i / w_i from a leverage pass (exact when eps == 0).
std::vector<double> phi(const RowMatrix& a_mat, const LossFamily& fam,
                        std::span<const double> w, double s, double eps,
                        uint64_t seed);

struct WeightScheme {
  int jmin = 0, jmax = 0;
  double alpha = 1.0;                        // certified scheme constant
  std::vector<std::vector<double>> weights;  // index j - jmin
  std::vector<double> score;                 // per-row max_j sigma_i at scale j
  double score_l1 = 0.0;
  std::vector<double> per_scale_gap;         // measured d(w, phi(w)), exact pass
  double smooth_factor = 1.0;                // max adjacent-scale weight ratio

  int scales() const { return jmax - jmin + 1; }
  const std::vector<double>& at(int j) const { return weights[j - jmin]; }
};

// Warm-up at the top scale followed by a downward sweep.  Each scale is
// polished to a fixed point of the iteration; the emitted scheme is audited
// with exact leverage scores and carries the measured alpha.
WeightScheme find_weights(const RowMatrix& a_mat, const LossFamily& fam,
                          int jmin, int jmax, std::span<const double> w0,
                          double beta, double eps = 0.1, uint64_t seed = 0);

struct InitialWeights {
  std::vector<double> w0;
  LossFamily perturbed;       // f_i(z) + smax w0_i z^2
  double beta = 0.0;          // bound for the find_weights precondition
  std::vector<double> zhat;   // bisection witnesses, f_i(zhat_i) in [gamma smax, smax]
};

InitialWeights initial_weights(const RowMatrix& a_mat, const LossFamily& fam,
                               double smax, double gamma, double delta_pert,
                               uint64_t seed);

}  // namespace glms
