#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "glms/instance.hpp"
#include "glms/sparsify.hpp"

namespace glms {

struct OracleResult {
  std::vector<double> x;
  double g_in = 0.0;
  double g_out = 0.0;
  int iters = 0;
};

// Relative-error oracle for G(x) = <lin, x> + sum_i w_i f_i(<a_i,x> - b_i):
// damped Newton with Armijo backtracking and a stall-based stopping rule
// tied to eps_or.
OracleResult glm_oracle(const RowMatrix& a_mat, const LossFamily& fam,
                        std::span<const double> w, std::span<const double> b,
                        std::span<const double> lin,
                        std::span<const double> x_in, double eps_or,
                        int max_iters = 500);

struct RefinementConfig {
  double alpha = 1.0;  // divergence sandwich constant (measured)
  double theta = 2.0;  // lower homogeneity of the surrogate
  double c = 1.0;
  double eta = 0.1;    // (10 alpha^2 / c)^{-1/(theta-1)}
  double gamma_bound = 1.0;
  double delta = 0.0;
  long long tau = 1;   // ceil(2 eta^{-1} log(Gamma/delta))
};

RefinementConfig make_refinement_config(const LossFamily& fam,
                                        double gamma_bound, double delta);

struct IterateOptions {
  uint64_t seed = 0;
  int threads = 1;
  int audit_dirs = 32;
  int audit_scales = 8;
  int max_budget_doublings = 3;
};

struct IterateResult {
  std::vector<double> x;
  bool accepted = false;
  bool dense_fallback = false;
  double f_before = 0.0;
  double f_after = 0.0;
  double gap_cert = 0.0;  // upper bound on F(x') - F* from the model value
  double step = 0.0;
  std::size_t support = 0;
  int oracle_iters = 0;
};

// One refinement step: sparsify the divergence surrogate on the window
// [m^-3 Gamma~, m^3 Gamma~], minimize the damped model with the oracle, and
// take the best monotone step along the returned direction.
IterateResult glm_iterate(const ProblemInstance& inst,
                          std::span<const double> x, double gamma_tilde,
                          const RefinementConfig& rc, const IterateOptions& opt);

struct TraceEntry {
  int iter = 0;
  double f = 0.0;
  bool accepted = false;
  bool dense_fallback = false;
  double gap = 0.0;
  double gamma_tilde = 0.0;
  double step = 0.0;
  std::size_t support = 0;
  int oracle_iters = 0;
};

struct SolveReport {
  std::vector<double> x;
  double value = 0.0;
  double gap_cert = 0.0;
  double f_lower = 0.0;  // best certified lower bound on F*
  std::vector<TraceEntry> trace;
  RefinementConfig config;
  int iterations = 0;
  bool hit_iteration_cap = false;
};

struct SolveOptions {
  uint64_t seed = 0;
  int threads = 1;
  double rel_target = 0.0;  // extra stop: gap <= rel_target * f_lower
  int max_iters = 4000;
  IterateOptions iterate;
};

SolveReport solve_glm(const ProblemInstance& inst, std::span<const double> x0,
                      double gamma_bound, double delta, const SolveOptions& opt);

// ||Ax - b||_p^p <= (1+eps) min, p in (1,2]
SolveReport solve_lp(const RowMatrix& a_mat, std::span<const double> b, double p,
                     double eps, const SolveOptions& opt);

struct DualReport {
  std::vector<double> y;
  double norm_qq = 0.0;   // ||y||_q^q
  double feas_rel = 0.0;  // ||A^T y - c|| / ||c||
  double eps0 = 0.0;      // primal accuracy used
  double penalty = 0.0;   // final constraint penalty
  SolveReport primal;
};

// min ||y||_q^q subject to A^T y = c, q in [2, inf)
DualReport solve_lp_dual(const RowMatrix& a_mat, std::span<const double> c,
                         double q, double eps, const SolveOptions& opt);

// Approximate Huber regression: sparsify globally, then one oracle solve on
// the sparse objective.
SolveReport solve_huber(const RowMatrix& a_mat, std::span<const double> b,
                        double eps, const SolveOptions& opt);

}  // namespace glms
