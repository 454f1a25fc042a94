#include "glms/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "glms/errors.hpp"
#include "glms/rng.hpp"

namespace glms {

double log_ratio_dist(std::span<const double> u, std::span<const double> w) {
  if (u.size() != w.size()) throw config_error("log-ratio metric: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const bool zu = u[i] == 0.0, zw = w[i] == 0.0;
    if (zu && zw) continue;
    if (zu || zw || u[i] < 0.0 || w[i] < 0.0)
      return std::numeric_limits<double>::infinity();
    d = std::max(d, std::abs(std::log(u[i] / w[i])));
  }
  return d;
}

std::vector<double> phi(const RowMatrix& a_mat, const LossFamily& fam,
                        std::span<const double> w, double s, double eps,
                        uint64_t seed) {
  const int m = a_mat.rows();
  if (int(w.size()) != m) throw config_error("phi: weight length mismatch");
  if (!(s > 0.0)) throw config_error("phi: scale must be positive");
  if (eps < 0.0 || eps >= 1.0 / 3.0)
    throw config_error("phi: eps must lie in [0, 1/3)");
  for (double v : w)
    if (!(v > 0.0)) throw config_error("phi: weights must be strictly positive");

  const std::vector<double> sigma = leverage_auto(a_mat, w, eps, seed);
  std::vector<double> out(m);
  for (int i = 0; i < m; ++i) {
    const double tau = sigma[i] / w[i];
    if (!(tau > 0.0))
      throw numeric_error("phi: nonzero row produced zero leverage");
    const double v = fam.value(i, std::sqrt(tau));
    if (!(v > 0.0))
      throw numeric_error("phi: degenerate loss (f vanishes at positive argument)");
    out[i] = v / (s * tau);
  }
  return out;
}

namespace {

struct ScaleAudit {
  std::vector<double> sigma;
  double gap;
};

ScaleAudit audit_scale(const RowMatrix& a_mat, const LossFamily& fam,
                       const std::vector<double>& w, double s) {
  LeverageResult lev = leverage_exact(a_mat, w);
  const int m = a_mat.rows();
  std::vector<double> mapped(m);
  for (int i = 0; i < m; ++i) {
    const double tau = lev.sigma[i] / w[i];
    if (!(tau > 0.0)) throw numeric_error("weight audit: zero leverage");
    mapped[i] = fam.value(i, std::sqrt(tau)) / (s * tau);
  }
  return {std::move(lev.sigma), log_ratio_dist(w, mapped)};
}

}  // namespace

WeightScheme find_weights(const RowMatrix& a_mat, const LossFamily& fam,
                          int jmin, int jmax, std::span<const double> w0,
                          double beta, double eps, uint64_t seed) {
  const int m = a_mat.rows();
  if (jmin > jmax) throw config_error("find_weights: jmin > jmax");
  if (int(w0.size()) != m) throw config_error("find_weights: w0 length mismatch");

  const LossConstants& k = fam.constants();
  const double delta_contr =
      std::max(std::abs(0.5 * k.theta - 1.0), std::abs(0.5 * k.u - 1.0));
  if (delta_contr >= 1.0)
    throw numeric_error(
        "find_weights: no contraction (needs theta < 4 and u < 4)");
  const double c1 = std::max(k.C, 1.0 / k.c);

  SplitRng rng(seed);
  std::vector<double> w(w0.begin(), w0.end());

  // Verify the initial-weight bound with one exact pass; a violation only
  // lengthens the warm-up.
  const double smax_top = std::ldexp(1.0, jmax);
  const double beta_measured =
      log_ratio_dist(phi(a_mat, fam, w, smax_top, 0.0, 0), w);
  const double beta_eff = std::max(beta, beta_measured);

  int warmup = 1;
  if (delta_contr > 0.0) {
    const double num = std::log((1.0 + beta_eff) / std::log(std::max(2.0 * c1, 2.0)));
    const double den = std::log(1.0 / delta_contr);
    if (num > 0.0 && den > 0.0)
      warmup = std::clamp(int(std::ceil(num / den)), 1, 500);
  }
  for (int t = 0; t < warmup; ++t)
    w = phi(a_mat, fam, w, smax_top, eps, rng.next_u64());

  WeightScheme scheme;
  scheme.jmin = jmin;
  scheme.jmax = jmax;
  scheme.weights.resize(jmax - jmin + 1);

  // Downward sweep; each scale is iterated to a fixed point (the single-pass
  // sweep leaves an O(1) gap which the polish removes).
  std::vector<double> prev = w;
  for (int j = jmax; j >= jmin; --j) {
    const double s = std::ldexp(1.0, j);
    std::vector<double> cur = phi(a_mat, fam, prev, s, eps, rng.next_u64());
    double best = std::numeric_limits<double>::infinity();
    int since_best = 0;
    for (int it = 0; it < 300; ++it) {
      std::vector<double> nxt = phi(a_mat, fam, cur, s, eps, rng.next_u64());
      const double dd = log_ratio_dist(nxt, cur);
      cur = std::move(nxt);
      if (dd < best) {
        best = dd;
        since_best = 0;
      } else if (++since_best >= 5) {
        break;
      }
      if (dd <= 1e-11) break;
    }
    scheme.weights[j - jmin] = cur;
    prev = std::move(cur);
  }

  // Exact audit: per-scale fixed-point gap, scores, adjacent-scale coupling.
  scheme.score.assign(m, 0.0);
  scheme.per_scale_gap.resize(scheme.scales());
  double max_gap = 0.0;
  for (int j = jmin; j <= jmax; ++j) {
    ScaleAudit a = audit_scale(a_mat, fam, scheme.at(j), std::ldexp(1.0, j));
    scheme.per_scale_gap[j - jmin] = a.gap;
    max_gap = std::max(max_gap, a.gap);
    for (int i = 0; i < m; ++i) scheme.score[i] = std::max(scheme.score[i], a.sigma[i]);
  }
  scheme.smooth_factor = 1.0;
  for (int j = jmin; j < jmax; ++j)
    for (int i = 0; i < m; ++i)
      scheme.smooth_factor =
          std::max(scheme.smooth_factor, scheme.at(j + 1)[i] / scheme.at(j)[i]);

  scheme.alpha = std::max(std::exp(max_gap), scheme.smooth_factor);
  scheme.score_l1 = 0.0;
  for (double sc : scheme.score) scheme.score_l1 += sc;

  if (delta_contr > 0.0) {
    const double alpha_limit =
        std::exp((2.0 * std::log(2.0 * c1) + std::log(2.0)) / (1.0 - delta_contr)) *
        1.01;
    if (scheme.alpha > alpha_limit)
      throw numeric_error("find_weights: audited alpha exceeds the contraction bound");
  }
  return scheme;
}

InitialWeights initial_weights(const RowMatrix& a_mat, const LossFamily& fam,
                               double smax, double gamma, double delta_pert,
                               uint64_t seed) {
  const int m = a_mat.rows();
  if (!(smax > 0.0)) throw config_error("initial_weights: smax must be positive");
  if (!(gamma > 0.0) || gamma > 1.0)
    throw config_error("initial_weights: gamma must lie in (0, 1]");
  if (!(delta_pert > 0.0))
    throw config_error("initial_weights: delta must be positive");

  InitialWeights out;
  out.zhat.resize(m);
  const double lo_target = gamma * smax;
  for (int i = 0; i < m; ++i) {
    double hi = 1.0;
    int guard = 0;
    while (fam.value(i, hi) < lo_target) {
      hi *= 2.0;
      if (++guard > 200 || !(hi < 1e300))
        throw config_error(
            "initial_weights: loss never reaches the target scale; use a proxy loss");
    }
    double lo = 0.5 * hi;
    while (lo > 1e-300 && fam.value(i, lo) >= lo_target) lo *= 0.5;
    // land anywhere in the [gamma smax, smax] band
    for (int it = 0; it < 200 && fam.value(i, hi) > smax; ++it) {
      const double mid = std::sqrt(lo * hi);
      if (fam.value(i, mid) >= lo_target)
        hi = mid;
      else
        lo = mid;
    }
    const double v = fam.value(i, hi);
    if (!(v >= lo_target && v <= smax))
      throw numeric_error("initial_weights: bisection failed to land in band");
    out.zhat[i] = hi;
  }

  std::vector<double> zw(m);
  for (int i = 0; i < m; ++i) zw[i] = 1.0 / (out.zhat[i] * out.zhat[i]);
  const std::vector<double> sigma =
      leverage_auto(a_mat, zw, 1.0 / 3.0, SplitRng(seed).next_u64());
  out.w0.resize(m);
  std::vector<double> quad(m);
  for (int i = 0; i < m; ++i) {
    const double tau = sigma[i] / zw[i];
    if (!(tau > 0.0)) throw numeric_error("initial_weights: zero leverage");
    out.w0[i] = delta_pert / tau;
    quad[i] = smax * out.w0[i];
  }
  out.perturbed = fam.with_quad(std::move(quad));
  const LossConstants& k = fam.constants();
  out.beta =
      std::log1p(128.0 * (k.L / k.c) * (k.L / k.c) * double(m) / delta_pert);
  return out;
}

}  // namespace glms
