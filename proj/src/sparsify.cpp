#include "glms/sparsify.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>

#include "glms/errors.hpp"
#include "glms/kernels.hpp"
#include "glms/parallel.hpp"
#include "glms/rng.hpp"

namespace glms {

namespace {

uint64_t fnv64(const void* data, std::size_t bytes) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ull;
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

int required_jmax(double smax) { return int(std::ceil(std::log2(smax))); }
int required_jmin(double smin, int m) {
  return int(std::floor(std::log2(smin))) -
         int(std::ceil(4.0 * std::log2(std::max(m, 2))));
}

std::size_t default_budget(double eps, double tau_l1, int m, double scale) {
  const double lg = std::log2(double(std::max(m, 2)));
  const double v = scale / (eps * eps) * tau_l1 * lg * lg * lg;
  return std::size_t(std::max(1.0, std::ceil(v)));
}

SparsifiedModel draw_model(const WeightScheme& scheme,
                           const std::vector<double>& rho, std::size_t m_samples,
                           uint64_t seed) {
  const int m = int(rho.size());
  std::vector<double> cum(m);
  double acc = 0.0;
  for (int i = 0; i < m; ++i) {
    acc += rho[i];
    cum[i] = acc;
  }

  std::vector<uint64_t> counts(m, 0);
  SplitRng rng = SplitRng(seed).split(0x73616d70ull);
  for (std::size_t j = 0; j < m_samples; ++j) {
    const double u = rng.next_double() * acc;
    const int idx = int(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin());
    counts[std::min(idx, m - 1)]++;
  }

  SparsifiedModel model;
  model.sample_count = m_samples;
  model.tau_l1 = scheme.score_l1;
  model.scheme_alpha = scheme.alpha;
  model.rho_hash = fnv64(rho.data(), rho.size() * sizeof(double));
  model.seed = seed;
  for (int i = 0; i < m; ++i) {
    if (counts[i] == 0) continue;
    model.indices.push_back(i);
    model.weights.push_back(double(counts[i]) / (double(m_samples) * rho[i]));
  }
  return model;
}

}  // namespace

double SparsifiedModel::eval_from_residuals(const ProblemInstance& inst,
                                            std::span<const double> z) const {
  double s = 0.0;
  for (std::size_t k = 0; k < indices.size(); ++k)
    s += weights[k] * inst.family.value(indices[k], z[indices[k]]);
  return s;
}

double SparsifiedModel::eval(const ProblemInstance& inst,
                             std::span<const double> x) const {
  const std::vector<double> z = inst.residuals(x);
  return eval_from_residuals(inst, z);
}

std::vector<double> sampling_plan(const WeightScheme& scheme) {
  const std::size_t m = scheme.score.size();
  if (m == 0) throw config_error("sampling plan: empty scheme");
  std::vector<double> rho(m);
  double total = 0.0;
  for (double s : scheme.score) total += s;
  if (!(total > 0.0)) throw numeric_error("sampling plan: zero score mass");
  for (std::size_t i = 0; i < m; ++i) {
    if (!(scheme.score[i] > 0.0))
      throw numeric_error("sampling plan: nonzero row with zero score");
    rho[i] = scheme.score[i] / total;
  }
  return rho;
}

SparsifiedModel sparsify_once(const ProblemInstance& inst,
                              const WeightScheme& scheme,
                              const SparsifyConfig& cfg) {
  if (!(cfg.eps > 0.0 && cfg.eps < 0.5))
    throw config_error("sparsify: eps must lie in (0, 1/2)");
  if (!(cfg.smin > 0.0 && cfg.smax > cfg.smin))
    throw config_error("sparsify: need 0 < smin < smax");
  const int m = inst.m();
  if (int(scheme.score.size()) != m)
    throw config_error("sparsify: scheme row count mismatch");
  if (scheme.jmax < required_jmax(cfg.smax) ||
      scheme.jmin > required_jmin(cfg.smin, m))
    throw config_error("sparsify: weight scheme does not cover the scale range");
  if (cfg.budget_override && *cfg.budget_override < 1)
    throw config_error("sparsify: sample budget must be at least 1");

  const std::vector<double> rho = sampling_plan(scheme);
  const std::size_t m_samples =
      cfg.budget_override
          ? *cfg.budget_override
          : default_budget(cfg.eps, scheme.score_l1, m, cfg.budget_scale);
  SparsifiedModel model = draw_model(scheme, rho, m_samples, cfg.seed);
  model.smin = cfg.smin;
  model.smax = cfg.smax;
  model.eps = cfg.eps;
  model.seed = cfg.seed;
  return model;
}

namespace {

struct RoundOutput {
  SparsifiedModel model;
  std::vector<double> rho;
};

// One sparsification round on a shift-free instance: perturbation-based
// initial weights, weight scheme, importance sampling, audit-driven budget
// doubling.
RoundOutput run_round(const ProblemInstance& work, double eps_round,
                      const SparsifyConfig& cfg, uint64_t seed) {
  const int m = work.m();
  const double m3 = double(m) * m * m;
  const double delta_pert =
      std::max(eps_round * cfg.smin / (m3 * cfg.smax), 1e-280);

  SplitRng chain(seed);
  InitialWeights iw = initial_weights(work.A, work.family, cfg.smax, 0.5,
                                      delta_pert, chain.next_u64());
  const int jmax = required_jmax(cfg.smax);
  const int jmin = required_jmin(cfg.smin, m);
  WeightScheme scheme = find_weights(work.A, iw.perturbed, jmin, jmax, iw.w0,
                                     iw.beta, 0.1, chain.next_u64());

  RoundOutput out;
  out.rho = sampling_plan(scheme);
  std::size_t budget =
      cfg.budget_override
          ? *cfg.budget_override
          : default_budget(eps_round, scheme.score_l1, m, cfg.budget_scale);

  for (int doubling = 0;; ++doubling) {
    SparsifiedModel model = draw_model(scheme, out.rho, budget, chain.next_u64());
    model.smin = cfg.smin;
    model.smax = cfg.smax;
    model.eps = eps_round;
    model.budget_doublings = doubling;
    if (!cfg.audit || doubling >= cfg.max_budget_doublings) {
      out.model = std::move(model);
      break;
    }
    AuditReport audit =
        audit_sparsifier(work, model, cfg.audit_dirs, cfg.audit_scales,
                         chain.next_u64(), cfg.threads);
    if (audit.max_rel_err <= eps_round) {
      out.model = std::move(model);
      break;
    }
    budget *= 2;
  }
  return out;
}

}  // namespace

SparsifiedModel sparsify(const ProblemInstance& inst, const SparsifyConfig& cfg) {
  inst.validate();
  const LossConstants& k = inst.family.constants();
  if (!(k.u <= 2.0 && k.theta > 0.0 && std::isfinite(k.L)))
    throw config_error(
        "sparsify: family needs u <= 2, theta > 0, finite L (bounded losses "
        "go through tukey_sparsify)");
  if (inst.family.kind() == LossKind::custom &&
      !certify_properties(inst.family).pass)
    throw config_error("sparsify: custom loss failed its property certificate");
  if (!(cfg.eps > 0.0 && cfg.eps < 0.5))
    throw config_error("sparsify: eps must lie in (0, 1/2)");
  if (!(cfg.smin > 0.0 && cfg.smax > cfg.smin))
    throw config_error("sparsify: need 0 < smin < smax");

  const ProblemInstance base = inst.shifted() ? lift_shift(inst) : inst;
  const int m = base.m();
  const int rounds = std::max(1, cfg.bootstrap_rounds);

  std::vector<int> alive(m);
  for (int i = 0; i < m; ++i) alive[i] = i;
  std::vector<double> abs_w(m, 1.0);

  SplitRng chain = SplitRng(cfg.seed).split(0x706c6e32ull);
  SparsifiedModel last;
  int total_doublings = 0;
  for (int r = 0; r < rounds; ++r) {
    const double eps_r = cfg.eps * std::pow(3.0, double(r + 1 - rounds));
    ProblemInstance sub;
    sub.A = base.A.select_rows(alive);
    std::vector<double> scales(alive.size());
    for (std::size_t t = 0; t < alive.size(); ++t)
      scales[t] = base.family.term_scale(alive[t]) * abs_w[alive[t]];
    sub.family = base.family.select_terms(alive).with_term_scales(scales);

    RoundOutput ro = run_round(sub, eps_r, cfg, chain.next_u64());
    total_doublings += ro.model.budget_doublings;

    std::vector<int> next_alive;
    next_alive.reserve(ro.model.indices.size());
    for (std::size_t t = 0; t < ro.model.indices.size(); ++t) {
      const int orig = alive[ro.model.indices[t]];
      abs_w[orig] *= ro.model.weights[t];
      next_alive.push_back(orig);
    }
    last = std::move(ro.model);
    alive = std::move(next_alive);
  }

  SparsifiedModel model;
  model.indices = alive;
  model.weights.reserve(alive.size());
  for (int i : alive) model.weights.push_back(abs_w[i]);
  model.smin = cfg.smin;
  model.smax = cfg.smax;
  model.eps = cfg.eps;
  model.seed = cfg.seed;
  model.sample_count = last.sample_count;
  model.tau_l1 = last.tau_l1;
  model.scheme_alpha = last.scheme_alpha;
  model.rho_hash = last.rho_hash;
  model.budget_doublings = total_doublings;
  return model;
}

SparsifiedModel huber_globalize(SparsifiedModel model,
                                const ProblemInstance& inst,
                                const SparsifyConfig& cfg) {
  const int m = inst.m();
  const bool is_huber =
      inst.family.kind() == LossKind::huber ||
      (inst.family.kind() == LossKind::gamma && inst.family.p() == 1.0);
  if (!is_huber)
    throw config_error("huber_globalize: family must be the unit huber loss");
  for (int i = 0; i < m; ++i)
    if (inst.family.threshold(i) != 1.0 || inst.family.term_scale(i) != 1.0)
      throw config_error(
          "huber_globalize: needs uniform unit thresholds and weights");
  if (!(cfg.eps > 1.0 / m && cfg.eps < 1.0))
    throw config_error("huber_globalize: eps must lie in (1/m, 1)");
  const double want_smax = 8.0 * double(m) * m * m;
  if (std::abs(cfg.smin - 0.5) > 1e-12 ||
      std::abs(cfg.smax - want_smax) > 1e-9 * want_smax)
    throw config_error("huber_globalize: model must be built on [1/2, 8m^3]");

  const double weight_cap = 2.0 * m;
  for (int attempt = 0; attempt < 16; ++attempt) {
    double wmax = 0.0;
    for (double w : model.weights) wmax = std::max(wmax, w);
    if (wmax <= weight_cap) {
      model.global = true;
      return model;
    }
    SparsifyConfig retry = cfg;
    retry.seed = SplitRng(cfg.seed).split(0x68756272ull + attempt).next_u64();
    model = sparsify(inst, retry);
  }
  throw numeric_error(
      "huber_globalize: sampled weight exceeded 2m after 16 re-samples");
}

SparsifiedModel tukey_sparsify(const ProblemInstance& inst,
                               const SparsifyConfig& cfg, double row_norm_bound,
                               double x_norm_bound) {
  inst.validate();
  if (inst.family.kind() != LossKind::tukey)
    throw config_error("tukey_sparsify: family must be tukey");
  if (!(row_norm_bound > 0.0) || !(x_norm_bound > 0.0))
    throw config_error("tukey_sparsify: row and x norm bounds must be declared");
  if (!(cfg.eps > 0.0 && cfg.eps < 0.5))
    throw config_error("tukey_sparsify: eps must lie in (0, 1/2)");
  const ProblemInstance base = inst.shifted() ? lift_shift(inst) : inst;
  const int m = base.m(), n = base.n();
  for (int i = 0; i < m; ++i)
    if (base.A.row_norm(i) > row_norm_bound)
      throw config_error("tukey_sparsify: row norm exceeds the declared bound");

  double eta = std::pow(std::log(std::max(double(n), 3.0)), -1.0 / 3.0);
  eta = std::min(eta, 1.0);
  LossFamily proxy = LossFamily::tukey_proxy(eta);
  if (base.family.has_term_scales()) {
    std::vector<double> sc(m);
    for (int i = 0; i < m; ++i) sc[i] = base.family.term_scale(i);
    proxy = proxy.with_term_scales(std::move(sc));
  }

  const int jmax = int(std::ceil(2.0 * std::log2(std::max(m, 2))));
  const int jmin = -jmax;
  const double smax = std::ldexp(1.0, jmax);

  SplitRng chain = SplitRng(cfg.seed).split(0x74756b79ull);
  const double delta_pert = std::max(
      cfg.eps * std::ldexp(1.0, jmin) / (double(m) * m * m * smax), 1e-280);
  InitialWeights iw =
      initial_weights(base.A, proxy, smax, 0.5, delta_pert, chain.next_u64());
  WeightScheme scheme = find_weights(base.A, iw.perturbed, jmin, jmax, iw.w0,
                                     iw.beta, 0.1, chain.next_u64());
  const std::vector<double> rho = sampling_plan(scheme);
  const std::size_t budget =
      cfg.budget_override
          ? *cfg.budget_override
          : default_budget(cfg.eps, scheme.score_l1, m, cfg.budget_scale);

  SparsifiedModel model = draw_model(scheme, rho, budget, chain.next_u64());
  model.smin = std::ldexp(1.0, jmin);
  model.smax = smax;
  model.eps = cfg.eps;
  model.seed = cfg.seed;
  model.x_norm_bound = x_norm_bound;
  return model;
}

namespace {

struct DirResult {
  double max_err = 0.0;
  double worst_lambda = 0.0;
  double worst_value = 0.0;
};

}  // namespace

AuditReport audit_sparsifier(const ProblemInstance& inst,
                             const SparsifiedModel& model, int n_dirs,
                             int n_scales, uint64_t seed, int threads,
                             double target_lo, double target_hi) {
  const ProblemInstance work = inst.shifted() ? lift_shift(inst) : inst;
  const int m = work.m(), n = work.n();
  if (n_scales <= 0) n_scales = 24;
  if (n_dirs <= 0) n_dirs = std::min(64 + n + m, 256);
  const bool norm_mode = model.x_norm_bound > 0.0;
  const double lo = target_lo > 0.0 ? target_lo : model.smin;
  const double hi = target_hi > 0.0 ? target_hi : model.smax;

  // directions: 64 Gaussian, coordinates, then rows spread over the matrix
  std::vector<std::vector<double>> dirs;
  dirs.reserve(n_dirs);
  SplitRng grng = SplitRng(seed).split(0x64697273ull);
  for (int d = 0; d < 64 && int(dirs.size()) < n_dirs; ++d) {
    std::vector<double> u(n);
    for (int j = 0; j < n; ++j) u[j] = grng.next_gaussian();
    dirs.push_back(std::move(u));
  }
  for (int j = 0; j < n && int(dirs.size()) < n_dirs; ++j) {
    std::vector<double> u(n, 0.0);
    u[j] = 1.0;
    dirs.push_back(std::move(u));
  }
  const int row_slots = n_dirs - int(dirs.size());
  for (int t = 0; t < row_slots && t < m; ++t) {
    const int i = int((std::size_t(t) * m) / std::max(row_slots, 1));
    std::vector<double> u(work.A.row_ptr(i), work.A.row_ptr(i) + n);
    dirs.push_back(std::move(u));
  }
  const int nd = int(dirs.size());

  std::vector<double> targets(n_scales);
  for (int k = 0; k < n_scales; ++k) {
    const double t = n_scales == 1 ? 1.0 : double(k) / (n_scales - 1);
    if (norm_mode)
      targets[k] = model.x_norm_bound * std::pow(1e-4, 1.0 - t);
    else
      targets[k] = lo * std::pow(hi / lo, t);
  }

  const int t_count = std::max(1, std::min(threads, nd));
  std::vector<DirResult> results(nd);
  // per-thread sensitivity accumulators; the max-merge is order independent
  std::vector<std::vector<double>> sens(
      t_count, std::vector<double>(std::size_t(n_scales) * m, 0.0));
  std::vector<std::vector<double>> scale_err(t_count,
                                             std::vector<double>(n_scales, 0.0));

  auto run_dir = [&](int d) {
    const std::vector<double>& u = dirs[d];
    std::vector<double> z(m);
    kern::matvec(work.A.data().data(), m, n, u.data(), z.data());
    if (kern::sumsq(z.data(), m) == 0.0) return;
    const double unorm = std::sqrt(kern::sumsq(u.data(), n));
    if (unorm == 0.0) return;

    auto f_at = [&](double lam) {
      double s = 0.0;
      for (int i = 0; i < m; ++i) s += work.family.value(i, lam * z[i]);
      return s;
    };
    std::vector<double>& acc = sens[d % t_count];
    DirResult& res = results[d];

    double lam_hint = 1.0;
    for (int k = 0; k < n_scales; ++k) {
      double lam, fv;
      if (norm_mode) {
        lam = targets[k] / unorm;
        fv = f_at(lam);
        if (!(fv > 0.0)) continue;
      } else {
        // bracket the monotone scaling curve, then bisect in log-lambda
        double hi_l = lam_hint;
        double f_hi = f_at(hi_l);
        int guard = 0;
        while (f_hi < targets[k] && guard++ < 4000) {
          hi_l *= 2.0;
          f_hi = f_at(hi_l);
          if (hi_l > 1e280) break;
        }
        if (f_hi < targets[k]) continue;  // unreachable target on this ray
        double lo_l = hi_l;
        double f_lo = f_hi;
        guard = 0;
        while (f_lo > targets[k] && guard++ < 4000) {
          lo_l *= 0.5;
          f_lo = f_at(lo_l);
          if (lo_l < 1e-280) break;
        }
        for (int it = 0; it < 64; ++it) {
          const double mid = std::sqrt(lo_l * hi_l);
          const double fm = f_at(mid);
          if (fm < targets[k])
            lo_l = mid;
          else
            hi_l = mid;
          if (hi_l / lo_l < 1.0 + 1e-12) break;
        }
        lam = hi_l;
        fv = f_at(lam);
        lam_hint = lam;
        if (!(fv > 0.0)) continue;
      }

      double approx = 0.0;
      for (std::size_t t = 0; t < model.indices.size(); ++t)
        approx += model.weights[t] *
                  work.family.value(model.indices[t], lam * z[model.indices[t]]);
      const double err = std::abs(fv - approx) / fv;
      if (err > res.max_err) {
        res.max_err = err;
        res.worst_lambda = lam;
        res.worst_value = fv;
      }
      scale_err[d % t_count][k] = std::max(scale_err[d % t_count][k], err);
      double* row = acc.data() + std::size_t(k) * m;
      for (int i = 0; i < m; ++i)
        row[i] = std::max(row[i], work.family.value(i, lam * z[i]) / fv);
    }
  };

  parallel_for(nd, t_count, run_dir);

  AuditReport rep;
  rep.dirs_used = nd;
  rep.scale_targets = targets;
  rep.scale_max_err.assign(n_scales, 0.0);
  rep.sens_sum.assign(n_scales, 0.0);
  int worst_dir = -1;
  for (int d = 0; d < nd; ++d) {
    if (results[d].max_err > rep.max_rel_err) {
      rep.max_rel_err = results[d].max_err;
      worst_dir = d;
    }
  }
  if (worst_dir >= 0) {
    rep.worst_x = dirs[worst_dir];
    for (double& v : rep.worst_x) v *= results[worst_dir].worst_lambda;
    rep.worst_value = results[worst_dir].worst_value;
  }
  for (int k = 0; k < n_scales; ++k) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) {
      double v = 0.0;
      for (int t = 0; t < t_count; ++t)
        v = std::max(v, sens[t][std::size_t(k) * m + i]);
      s += v;
    }
    rep.sens_sum[k] = s;
    rep.c_xi = std::max(rep.c_xi, s / double(n));
    for (int t = 0; t < t_count; ++t)
      rep.scale_max_err[k] = std::max(rep.scale_max_err[k], scale_err[t][k]);
  }
  return rep;
}

McProbe unbiasedness_probe(const ProblemInstance& inst,
                           std::span<const double> rho, std::size_t samples,
                           std::span<const double> x, int n_seeds,
                           uint64_t seed) {
  const int m = inst.m();
  if (int(rho.size()) != m) throw config_error("probe: rho length mismatch");
  const std::vector<double> z = inst.residuals(x);
  std::vector<double> q(m), cum(m);
  double f_val = 0.0, acc = 0.0;
  for (int i = 0; i < m; ++i) {
    const double v = inst.family.value(i, z[i]);
    f_val += v;
    q[i] = v / rho[i];
    acc += rho[i];
    cum[i] = acc;
  }

  double mean = 0.0, m2 = 0.0;
  for (int s = 0; s < n_seeds; ++s) {
    SplitRng rng = SplitRng(seed).split(uint64_t(s) + 1);
    double est = 0.0;
    for (std::size_t j = 0; j < samples; ++j) {
      const double u = rng.next_double() * acc;
      const int idx = std::min(
          int(std::upper_bound(cum.begin(), cum.end(), u) - cum.begin()), m - 1);
      est += q[idx];
    }
    est /= double(samples);
    const double d = est - mean;
    mean += d / double(s + 1);
    m2 += d * (est - mean);
  }
  McProbe p;
  p.f_value = f_val;
  p.mean = mean;
  const double var = n_seeds > 1 ? m2 / double(n_seeds - 1) : 0.0;
  p.se = std::sqrt(var / double(n_seeds));
  p.z_score = p.se > 0.0 ? (mean - f_val) / p.se : 0.0;
  return p;
}

}  // namespace glms
