#include "glms/solve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "glms/dense.hpp"
#include "glms/errors.hpp"
#include "glms/kernels.hpp"
#include "glms/leverage.hpp"
#include "glms/rng.hpp"

namespace glms {

namespace {

double eval_g(const RowMatrix& a_mat, const LossFamily& fam,
              std::span<const double> w, std::span<const double> b,
              std::span<const double> lin, const std::vector<double>& x,
              std::vector<double>& z) {
  const int m = a_mat.rows(), n = a_mat.cols();
  z.resize(m);
  kern::matvec(a_mat.data().data(), m, n, x.data(), z.data());
  double g = kern::dot(lin.data(), x.data(), n);
  for (int i = 0; i < m; ++i) {
    if (!b.empty()) z[i] -= b[i];
    g += w[i] * fam.value(i, z[i]);
  }
  return g;
}

}  // namespace

OracleResult glm_oracle(const RowMatrix& a_mat, const LossFamily& fam,
                        std::span<const double> w, std::span<const double> b,
                        std::span<const double> lin,
                        std::span<const double> x_in, double eps_or,
                        int max_iters) {
  const int m = a_mat.rows(), n = a_mat.cols();
  if (!(eps_or > 0.0)) throw config_error("oracle: eps must be strictly positive");
  if (int(w.size()) != m || (!b.empty() && int(b.size()) != m) ||
      int(lin.size()) != n || int(x_in.size()) != n)
    throw config_error("oracle: dimension mismatch");

  std::vector<double> x(x_in.begin(), x_in.end());
  std::vector<double> z;
  double g_val = eval_g(a_mat, fam, w, b, lin, x, z);

  OracleResult res;
  res.g_in = g_val;
  double g_best = g_val;
  std::vector<double> x_best = x;
  std::vector<double> best_hist;
  const double x_in_norm = std::sqrt(kern::sumsq(x_in.data(), n));

  std::vector<double> grad(n), d(n), h_mat;
  std::vector<double> x_try(n), z_try;
  double flat_step = 1.0;  // grows while descending through zero curvature
  int it = 0;
  for (; it < max_iters; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double zmax = 0.0;
    for (int i = 0; i < m; ++i) zmax = std::max(zmax, std::abs(z[i]));
    for (int i = 0; i < m; ++i)
      kern::axpy(w[i] * fam.deriv(i, z[i]), a_mat.row_ptr(i), grad.data(), n);
    for (int j = 0; j < n; ++j) grad[j] += lin[j];
    const double gnorm = std::sqrt(kern::sumsq(grad.data(), n));
    if (gnorm <= 1e-13 * (1.0 + std::abs(g_val))) break;

    // Hessian with a residual floor for the p < 2 curvature singularity
    const double zeps = 1e-8 * (1.0 + zmax);
    h_mat.assign(std::size_t(n) * n, 0.0);
    for (int i = 0; i < m; ++i) {
      const double zi = std::abs(z[i]) < zeps ? (z[i] < 0.0 ? -zeps : zeps) : z[i];
      const double curv = w[i] * fam.second(i, zi);
      if (curv == 0.0) continue;
      kern::rank1_upper(h_mat.data(), a_mat.row_ptr(i), curv, n);
    }
    kern::sym_mirror_lower(h_mat.data(), n);
    double tr = 0.0;
    for (int j = 0; j < n; ++j) tr += h_mat[std::size_t(j) * n + j];
    const bool flat = !(tr > 0.0);
    const double lreg = flat ? std::max(1e-12, gnorm) : 1e-12 * tr / n;
    for (int j = 0; j < n; ++j) h_mat[std::size_t(j) * n + j] += lreg;

    GramFactorization hf(h_mat, n);
    std::vector<double> neg(grad);
    for (double& v : neg) v = -v;
    hf.solve_pinv(neg.data(), d.data());
    double slope = kern::dot(grad.data(), d.data(), n);
    if (!(slope < 0.0)) {
      for (int j = 0; j < n; ++j) d[j] = -grad[j];
      slope = -gnorm * gnorm;
    }

    // In a zero-curvature region a unit step never escapes a descent ray;
    // grow the trial step geometrically so unbounded objectives are detected.
    double t = flat ? flat_step : 1.0;
    bool moved = false;
    for (int bt = 0; bt < 80; ++bt) {
      x_try = x;
      kern::axpy(t, d.data(), x_try.data(), n);
      const double g_try = eval_g(a_mat, fam, w, b, lin, x_try, z_try);
      if (g_try <= g_val + 1e-4 * t * slope) {
        x.swap(x_try);
        z.swap(z_try);
        g_val = g_try;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
    flat_step = flat && t >= flat_step ? flat_step * 8.0 : 1.0;

    if (kern::sumsq(x.data(), n) > 1e26 * (1.0 + x_in_norm) * (1.0 + x_in_norm) ||
        g_val < -1e100)
      throw numeric_error("oracle: objective appears unbounded below");

    if (g_val < g_best) {
      g_best = g_val;
      x_best = x;
    }
    best_hist.push_back(g_best);
    const std::size_t back = 10;
    if (best_hist.size() > back) {
      const double window_gain = best_hist[best_hist.size() - 1 - back] - g_best;
      if (window_gain < eps_or * (res.g_in - g_best) / 4.0) {
        ++it;
        break;
      }
    }
  }
  res.iters = it;
  res.g_out = g_best;
  res.x = std::move(x_best);
  return res;
}

RefinementConfig make_refinement_config(const LossFamily& fam,
                                        double gamma_bound, double delta) {
  if (!fam.refinable())
    throw config_error(
        "refinement needs power/gamma losses with p in (1,2] (theta > 1)");
  const EquivConstants eq = divergence_equivalence(fam.kind(), fam.p());
  RefinementConfig rc;
  rc.alpha = eq.upper / eq.lower;
  rc.theta = fam.p();
  rc.c = 1.0;
  rc.eta = std::pow(10.0 * rc.alpha * rc.alpha / rc.c, -1.0 / (rc.theta - 1.0));
  rc.gamma_bound = gamma_bound;
  rc.delta = delta;
  if (delta > 0.0 && delta < gamma_bound) {
    const double t = std::ceil(2.0 / rc.eta * std::log(gamma_bound / delta));
    rc.tau = t < 9e18 ? (long long)t : (long long)9e18;
  }
  rc.tau = std::max(rc.tau, 1ll);
  return rc;
}

IterateResult glm_iterate(const ProblemInstance& inst,
                          std::span<const double> x, double gamma_tilde,
                          const RefinementConfig& rc, const IterateOptions& opt) {
  const int m = inst.m(), n = inst.n();
  if (!(gamma_tilde > 0.0)) throw config_error("iterate: error bound must be > 0");

  IterateResult out;
  const std::vector<double> y = inst.residuals(x);
  const double f0 = inst.value_from_residuals(y);
  out.f_before = f0;
  out.x.assign(x.begin(), x.end());

  std::vector<double> grad(n, 0.0);
  for (int i = 0; i < m; ++i)
    kern::axpy(inst.family.deriv(i, y[i]), inst.A.row_ptr(i), grad.data(), n);

  // Surrogate sum: r(D) = sum_i gamma_p(max(t_i, |y_i|), <a_i, D>), the
  // threshold form of each term's divergence at the current residual.
  const bool is_power = inst.family.kind() == LossKind::power;
  std::vector<double> thr(m), scales(m);
  for (int i = 0; i < m; ++i) {
    const double base = is_power ? 0.0 : inst.family.threshold(i);
    thr[i] = std::max(std::max(base, std::abs(y[i])), 1e-290);
    scales[i] = inst.family.term_scale(i);
  }
  ProblemInstance surr;
  surr.A = inst.A;
  surr.family =
      LossFamily::gamma(inst.family.p(), std::move(thr)).with_term_scales(scales);

  const double m3 = double(m) * m * m;
  SparsifyConfig scfg;
  scfg.eps = 0.1;
  scfg.smin = gamma_tilde / m3;
  scfg.smax = gamma_tilde * m3;
  scfg.seed = opt.seed;
  scfg.audit = true;
  scfg.audit_dirs = opt.audit_dirs;
  scfg.audit_scales = opt.audit_scales;
  scfg.max_budget_doublings = opt.max_budget_doublings;
  scfg.threads = opt.threads;

  SparsifiedModel model = sparsify(surr, scfg);
  AuditReport check =
      audit_sparsifier(surr, model, opt.audit_dirs, opt.audit_scales,
                       SplitRng(opt.seed).next_u64(), opt.threads);
  if (check.max_rel_err > scfg.eps) {
    out.dense_fallback = true;
    model.indices.resize(m);
    model.weights.assign(m, 1.0);
    for (int i = 0; i < m; ++i) model.indices[i] = i;
  }
  out.support = model.support();

  // Oracle problem in the step variable D:
  //   G(D) = <grad - damp sum w~ f'(y) a, D> + damp sum w~ f(y + <a, D>)
  const double damp = 2.0 / (3.0 * rc.alpha);
  const int s = int(model.indices.size());
  RowMatrix a_sup = inst.A.select_rows(model.indices);
  LossFamily fam_sup = inst.family.select_terms(model.indices);
  std::vector<double> w_or(s), b_sup(s), lin(grad);
  for (int k = 0; k < s; ++k) {
    const int i = model.indices[k];
    w_or[k] = damp * model.weights[k];
    b_sup[k] = -y[i];
    kern::axpy(-damp * model.weights[k] * inst.family.deriv(i, y[i]),
               inst.A.row_ptr(i), lin.data(), n);
  }

  const double eps_or = std::max(rc.eta / (30.0 * rc.alpha), 1e-12);
  std::vector<double> zero(n, 0.0);
  OracleResult ores = glm_oracle(a_sup, fam_sup, w_or, b_sup, lin, zero, eps_or);
  out.oracle_iters = ores.iters;

  // The oracle objective drops the constant -damp sum w~ f(y), so the model
  // value at D^ relative to D = 0 is g_out - g_in.  h being a pointwise
  // underestimate of F on the validity window gives
  //   F(x) - F* <= -(h(D^) - F(x)) = g_in - g_out, up to the oracle gap.
  out.gap_cert =
      std::max(0.0, ores.g_in - ores.g_out) / (1.0 - std::min(eps_or, 0.5));

  // Monotone step: the guaranteed eta step plus a halving ladder from 1.
  std::vector<double> z_step(m);
  kern::matvec(inst.A.data().data(), m, n, ores.x.data(), z_step.data());
  auto f_along = [&](double t) {
    double v = 0.0;
    for (int i = 0; i < m; ++i) v += inst.family.value(i, y[i] + t * z_step[i]);
    return v;
  };
  double best_t = 0.0, best_f = f0;
  double t = 1.0;
  for (int k = 0; k < 44; ++k) {
    const double ft = f_along(t);
    if (ft < best_f) {
      best_f = ft;
      best_t = t;
    }
    if (t <= rc.eta) break;
    t = std::max(t * 0.5, rc.eta);
  }
  out.step = best_t;
  out.accepted = best_t > 0.0;
  if (out.accepted) {
    kern::axpy(best_t, ores.x.data(), out.x.data(), n);
    out.f_after = best_f;
  } else {
    out.f_after = f0;
  }
  return out;
}

SolveReport solve_glm(const ProblemInstance& inst, std::span<const double> x0,
                      double gamma_bound, double delta, const SolveOptions& opt) {
  inst.validate();
  SolveReport rep;
  rep.x.assign(x0.begin(), x0.end());
  rep.value = inst.value(rep.x);
  rep.config = make_refinement_config(inst.family, gamma_bound,
                                      delta > 0.0 ? delta : gamma_bound * 1e-15);
  rep.gap_cert = gamma_bound;
  if (delta >= gamma_bound) {
    rep.iterations = 0;
    return rep;
  }

  SplitRng chain = SplitRng(opt.seed).split(0x736f6c76ull);
  const double floor_target = delta > 0.0 ? delta : 1e-15 * gamma_bound;
  double gap_prev = gamma_bound;
  int stall = 0;
  const long long cap = std::min<long long>(rep.config.tau, opt.max_iters);
  long long t_iter = 0;
  for (; t_iter < cap; ++t_iter) {
    const double sched =
        gamma_bound * std::pow(1.0 - rep.config.eta / 2.0, double(t_iter));
    const double gamma_tilde =
        std::max(std::min(sched, std::max(gap_prev, floor_target)), floor_target);

    IterateOptions iopt = opt.iterate;
    iopt.seed = chain.next_u64();
    iopt.threads = opt.threads;
    IterateResult it = glm_iterate(inst, rep.x, gamma_tilde, rep.config, iopt);

    TraceEntry te;
    te.iter = int(t_iter);
    te.f = it.f_after;
    te.accepted = it.accepted;
    te.dense_fallback = it.dense_fallback;
    te.gap = it.gap_cert;
    te.gamma_tilde = gamma_tilde;
    te.step = it.step;
    te.support = it.support;
    te.oracle_iters = it.oracle_iters;
    rep.trace.push_back(te);

    const double f_prev = rep.value;
    rep.x = std::move(it.x);
    rep.value = it.f_after;
    rep.gap_cert = it.gap_cert;
    rep.f_lower = std::max(rep.f_lower, rep.value - it.gap_cert);
    gap_prev = it.gap_cert;

    if (rep.gap_cert <= floor_target) {
      ++t_iter;
      break;
    }
    if (opt.rel_target > 0.0 && rep.gap_cert <= opt.rel_target * rep.f_lower) {
      ++t_iter;
      break;
    }
    const bool no_f = std::abs(f_prev - rep.value) <= 1e-16 * std::max(1.0, f_prev);
    stall = no_f ? stall + 1 : 0;
    if (stall >= 25) {
      ++t_iter;
      break;
    }
  }
  rep.iterations = int(t_iter);
  rep.hit_iteration_cap = (t_iter >= cap);
  return rep;
}

SolveReport solve_lp(const RowMatrix& a_mat, std::span<const double> b, double p,
                     double eps, const SolveOptions& opt) {
  if (!(p > 1.0) || p > 2.0) throw config_error("solve_lp supports p in (1, 2]");
  if (!(eps > 0.0)) throw config_error("solve_lp: eps must be positive");
  ProblemInstance inst{a_mat, {b.begin(), b.end()}, LossFamily::power(p)};
  inst.validate();
  std::vector<double> x0(a_mat.cols(), 0.0);
  const double gamma_bound = std::max(inst.value(x0), 1e-300);
  SolveOptions o = opt;
  if (o.rel_target == 0.0) o.rel_target = 0.5 * eps;
  return solve_glm(inst, x0, gamma_bound, 0.0, o);
}

DualReport solve_lp_dual(const RowMatrix& a_mat, std::span<const double> c,
                         double q, double eps, const SolveOptions& opt) {
  const int m = a_mat.rows(), n = a_mat.cols();
  if (!(q >= 2.0)) throw config_error("solve_lp_dual supports q in [2, inf)");
  if (int(c.size()) != n) throw config_error("solve_lp_dual: c dimension mismatch");
  const double p = q / (q - 1.0);

  DualReport rep;
  rep.eps0 = std::pow(eps * std::pow(double(m), 1.0 / q - 0.5), 2.0 * q / p);
  rep.eps0 = std::clamp(rep.eps0, 1e-12, 0.2);

  const double cnorm = std::sqrt(kern::sumsq(c.data(), n));
  if (!(cnorm > 0.0)) throw config_error("solve_lp_dual: c must be nonzero");

  // crude operator-norm estimate for the starting penalty
  SplitRng rng = SplitRng(opt.seed).split(0x6f706e72ull);
  std::vector<double> v(n), av(m);
  for (int j = 0; j < n; ++j) v[j] = rng.next_gaussian();
  double sigma = 1.0;
  for (int it = 0; it < 12; ++it) {
    kern::matvec(a_mat.data().data(), m, n, v.data(), av.data());
    std::vector<double> w(n, 0.0);
    for (int i = 0; i < m; ++i) kern::axpy(av[i], a_mat.row_ptr(i), w.data(), n);
    const double wn = std::sqrt(kern::sumsq(w.data(), n));
    if (wn == 0.0) break;
    sigma = std::sqrt(wn);
    for (int j = 0; j < n; ++j) v[j] = w[j] / wn;
  }

  // constrained primal via penalty: K |<c,x> - 1|^p + ||A x||_p^p
  double penalty = 10.0 * std::pow(std::max(sigma / cnorm, 1e-6), p);
  std::vector<double> xbar(n, 0.0);
  double feas = 0.0;
  for (int esc = 0; esc <= 6; ++esc) {
    std::vector<double> rows(a_mat.data());
    rows.insert(rows.end(), c.begin(), c.end());
    RowMatrix aug(m + 1, n, std::move(rows));
    std::vector<double> shifts(m + 1, 0.0);
    shifts[m] = 1.0;
    std::vector<double> scales(m + 1, 1.0);
    scales[m] = penalty;
    ProblemInstance pin{aug, shifts, LossFamily::power(p).with_term_scales(scales)};
    std::vector<double> x0(n, 0.0);
    SolveOptions po = opt;
    po.seed = SplitRng(opt.seed).split(0x4b657363ull + esc).next_u64();
    po.rel_target = 0.5 * rep.eps0;
    SolveReport ps = solve_glm(pin, x0, std::max(pin.value(x0), 1e-300), 0.0, po);
    xbar = ps.x;
    feas = kern::dot(c.data(), xbar.data(), n);
    rep.primal = std::move(ps);
    rep.penalty = penalty;
    if (std::abs(feas - 1.0) <= 1e-9) break;
    penalty *= 10.0;
  }
  if (!(feas > 0.0))
    throw numeric_error("solve_lp_dual: penalized primal failed to satisfy <c,x>=1");
  for (double& xv : xbar) xv /= feas;

  std::vector<double> ax(m);
  kern::matvec(a_mat.data().data(), m, n, xbar.data(), ax.data());
  double norm_pp = 0.0;
  for (int i = 0; i < m; ++i) norm_pp += std::pow(std::abs(ax[i]), p);
  if (!(norm_pp > 0.0))
    throw numeric_error("solve_lp_dual: degenerate primal solution");
  std::vector<double> y(m);
  for (int i = 0; i < m; ++i) {
    const double az = std::abs(ax[i]);
    y[i] = az == 0.0 ? 0.0 : std::copysign(std::pow(az, p - 1.0), ax[i]) / norm_pp;
  }

  // orthogonal projection onto {y : A^T y = c}, iterated twice
  std::vector<double> ones(m, 1.0);
  GramFactorization gf = gram(a_mat, ones);
  std::vector<double> resid(n), u(n);
  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < n; ++j) resid[j] = -c[j];
    for (int i = 0; i < m; ++i) kern::axpy(y[i], a_mat.row_ptr(i), resid.data(), n);
    gf.solve_pinv(resid.data(), u.data());
    for (int i = 0; i < m; ++i) y[i] -= kern::dot(a_mat.row_ptr(i), u.data(), n);
  }
  for (int j = 0; j < n; ++j) resid[j] = -c[j];
  for (int i = 0; i < m; ++i) kern::axpy(y[i], a_mat.row_ptr(i), resid.data(), n);
  rep.feas_rel = std::sqrt(kern::sumsq(resid.data(), n)) / cnorm;
  if (rep.feas_rel > 1e-8)
    throw numeric_error("solve_lp_dual: c is not in the row space of A");

  rep.norm_qq = 0.0;
  for (int i = 0; i < m; ++i) rep.norm_qq += std::pow(std::abs(y[i]), q);
  rep.y = std::move(y);
  return rep;
}

SolveReport solve_huber(const RowMatrix& a_mat, std::span<const double> b,
                        double eps, const SolveOptions& opt) {
  const int m = a_mat.rows(), n = a_mat.cols();
  if (!(eps > 1.0 / m && eps < 0.5))
    throw config_error("solve_huber: eps must lie in (1/m, 1/2)");
  ProblemInstance inst{a_mat, {b.begin(), b.end()}, LossFamily::huber()};
  inst.validate();

  SparsifyConfig scfg;
  scfg.eps = eps;
  scfg.smin = 0.5;
  scfg.smax = 8.0 * double(m) * m * m;
  scfg.seed = opt.seed;
  scfg.threads = opt.threads;
  SparsifiedModel model = sparsify(inst, scfg);
  model = huber_globalize(std::move(model), inst, scfg);

  RowMatrix a_sup = a_mat.select_rows(model.indices);
  LossFamily fam_sup = inst.family.select_terms(model.indices);
  std::vector<double> b_sup;
  b_sup.reserve(model.indices.size());
  for (int i : model.indices) b_sup.push_back(b.empty() ? 0.0 : b[i]);
  std::vector<double> lin(n, 0.0), x0(n, 0.0);
  OracleResult ores =
      glm_oracle(a_sup, fam_sup, model.weights, b_sup, lin, x0, 1e-9, 2000);

  SolveReport rep;
  rep.x = std::move(ores.x);
  rep.value = inst.value(rep.x);
  rep.gap_cert = std::numeric_limits<double>::quiet_NaN();
  TraceEntry te;
  te.f = rep.value;
  te.accepted = true;
  te.support = model.support();
  te.oracle_iters = ores.iters;
  rep.trace.push_back(te);
  rep.iterations = 1;
  return rep;
}

}  // namespace glms
