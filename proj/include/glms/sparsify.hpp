#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glms/instance.hpp"
#include "glms/weights.hpp"

namespace glms {

struct SparsifyConfig {
  double eps = 0.1;
  double smin = 1.0;
  double smax = 1e6;
  uint64_t seed = 0;
  int bootstrap_rounds = 1;         // h; round i runs at eps * 3^{i+1-h}
  double budget_scale = 1.0;        // C_M in M = ceil(C_M eps^-2 ||tau||_1 log2(m)^3)
  std::optional<std::size_t> budget_override;
  bool audit = true;                // audit-driven budget doubling
  int max_budget_doublings = 3;
  int audit_dirs = 64;              // in-pipeline audit effort
  int audit_scales = 12;
  int threads = 1;
};

struct SparsifiedModel {
  std::vector<int> indices;      // ascending
  std::vector<double> weights;   // nonnegative
  double smin = 0.0, smax = 0.0;
  bool global = false;           // validity extended to all x (Huber)
  double x_norm_bound = 0.0;     // > 0: validity is the ball ||x|| <= bound
  double eps = 0.0;
  uint64_t seed = 0;
  // provenance / stats
  std::size_t sample_count = 0;  // M
  double tau_l1 = 0.0;
  double scheme_alpha = 1.0;
  uint64_t rho_hash = 0;
  int budget_doublings = 0;

  std::size_t support() const { return indices.size(); }
  // F~(x) = sum over support of w f_i(<a_i,x> - b_i), terms from `inst`
  double eval(const ProblemInstance& inst, std::span<const double> x) const;
  double eval_from_residuals(const ProblemInstance& inst,
                             std::span<const double> z) const;
};

// rho_i = score_i / ||score||_1 from the scheme's per-row max leverage.
std::vector<double> sampling_plan(const WeightScheme& scheme);

SparsifiedModel sparsify_once(const ProblemInstance& inst,
                              const WeightScheme& scheme,
                              const SparsifyConfig& cfg);

// Full pipeline: perturbation initial weights -> weight scheme -> sampling,
// bootstrapped cfg.bootstrap_rounds times with a geometric eps schedule.
SparsifiedModel sparsify(const ProblemInstance& inst, const SparsifyConfig& cfg);

// Promote a Huber model built on [1/2, 8m^3] to an all-of-R^n guarantee.
// Re-samples (fresh seeds) while the max weight exceeds 2m.
SparsifiedModel huber_globalize(SparsifiedModel model, const ProblemInstance& inst,
                                const SparsifyConfig& cfg);

// Sampler for bounded (tukey) losses through the min(|z|,|z|^eta)^2 proxy,
// valid on the ball ||x||_2 <= x_norm_bound.
SparsifiedModel tukey_sparsify(const ProblemInstance& inst,
                               const SparsifyConfig& cfg, double row_norm_bound,
                               double x_norm_bound);

struct AuditReport {
  double max_rel_err = 0.0;
  std::vector<double> worst_x;
  double worst_value = 0.0;       // F at the worst witness
  std::vector<double> scale_targets;
  std::vector<double> scale_max_err;
  std::vector<double> sens_sum;   // estimated sum_i xi_i(s) per target
  double c_xi = 0.0;              // max_s sens_sum / n
  int dirs_used = 0;
};

// Sweeps random/coordinate/row directions, bisecting F(lambda u) onto
// log-spaced targets in [smin, smax] (or radii up to x_norm_bound for
// norm-ball models), and reports the worst relative deviation together with
// restricted sensitivity-sum estimates.
AuditReport audit_sparsifier(const ProblemInstance& inst,
                             const SparsifiedModel& model, int n_dirs,
                             int n_scales, uint64_t seed, int threads = 1,
                             double target_lo = 0.0, double target_hi = 0.0);

// Monte-Carlo unbiasedness probe at a fixed x: mean of F~(x) over fresh draws
// against F(x), with the standard error of the mean.
struct McProbe {
  double f_value = 0.0;
  double mean = 0.0;
  double se = 0.0;
  double z_score = 0.0;
};
McProbe unbiasedness_probe(const ProblemInstance& inst,
                           std::span<const double> rho, std::size_t samples,
                           std::span<const double> x, int n_seeds,
                           uint64_t seed);

}  // namespace glms
