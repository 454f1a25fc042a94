#include "glms/loss.hpp"

#include <cmath>
#include <limits>
#include <map>
#include <mutex>

#include "glms/errors.hpp"

namespace glms {

namespace {

// |z|^e with fast paths for the exponents the solvers actually hit.
double powr(double az, double e) {
  if (e == 2.0) return az * az;
  if (e == 1.0) return az;
  if (e == 0.0) return 1.0;
  if (e == 0.5) return std::sqrt(az);
  if (e == 1.5) return az * std::sqrt(az);
  if (e == -0.5) return 1.0 / std::sqrt(az);
  if (e == -1.0) return 1.0 / az;
  return std::pow(az, e);
}

void check_finite(double z, const char* what) {
  if (!std::isfinite(z)) throw config_error(std::string(what) + ": non-finite argument");
}

}  // namespace

const char* loss_kind_name(LossKind k) {
  switch (k) {
    case LossKind::power: return "power";
    case LossKind::gamma: return "gamma";
    case LossKind::huber: return "huber";
    case LossKind::tukey_proxy: return "tukey-proxy";
    case LossKind::tukey: return "tukey";
    case LossKind::custom: return "custom";
  }
  return "?";
}

double gamma_value(double p, double t, double z) {
  if (z == 0.0) return 0.0;
  const double az = std::abs(z);
  if (t > 0.0 && az <= t) return 0.5 * p * powr(t, p - 2.0) * z * z;
  const double tail = (t > 0.0) ? (1.0 - 0.5 * p) * powr(t, p) : 0.0;
  return powr(az, p) - tail;
}

double gamma_deriv(double p, double t, double z) {
  const double az = std::abs(z);
  if (t > 0.0 && az <= t) return p * powr(t, p - 2.0) * z;
  if (az == 0.0) return 0.0;  // t == 0, p > 1 assumed by callers
  return p * powr(az, p - 1.0) * (z > 0.0 ? 1.0 : -1.0);
}

double gamma_second(double p, double t, double z) {
  const double az = std::abs(z);
  if (t > 0.0 && az <= t) return p * powr(t, p - 2.0);
  return p * (p - 1.0) * powr(az, p - 2.0);
}

LossFamily LossFamily::power(double p) {
  if (!(p > 0.0) || p > 2.0) throw config_error("power loss needs p in (0,2]");
  LossFamily f;
  f.kind_ = LossKind::power;
  f.p_ = p;
  f.constants_ = {1.0, p, 1.0, p, 1.0, 1.0};
  f.label_ = "power(p=" + std::to_string(p) + ")";
  return f;
}

LossFamily LossFamily::gamma(double p, std::vector<double> thresholds) {
  if (!(p > 0.0) || p > 2.0) throw config_error("gamma loss needs p in (0,2]");
  for (double t : thresholds)
    if (!(t > 0.0)) throw config_error("gamma loss thresholds must be positive");
  LossFamily f;
  f.kind_ = LossKind::gamma;
  f.p_ = p;
  f.thresholds_ = std::move(thresholds);
  f.constants_ = {1.0, p, 1.0, 2.0, 1.0, 1.0};
  f.label_ = "gamma(p=" + std::to_string(p) + ")";
  return f;
}

LossFamily LossFamily::huber(std::vector<double> thresholds) {
  LossFamily f = gamma(1.0, std::move(thresholds));
  f.kind_ = LossKind::huber;
  f.label_ = "huber";
  return f;
}

LossFamily LossFamily::tukey_proxy(double eta) {
  if (!(eta > 0.0) || eta > 1.0) throw config_error("tukey proxy needs eta in (0,1]");
  LossFamily f;
  f.kind_ = LossKind::tukey_proxy;
  f.eta_ = eta;
  f.constants_ = {1.0, 2.0 * eta, 1.0, 2.0, 1.0, 1.0};
  f.label_ = "tukey-proxy(eta=" + std::to_string(eta) + ")";
  return f;
}

LossFamily LossFamily::tukey() {
  LossFamily f;
  f.kind_ = LossKind::tukey;
  // min(z^2, 1) is bounded: no positive lower-homogeneity exponent exists.
  f.constants_ = {1.0, 0.0, 1.0, 2.0, 1.0, 1.0};
  f.label_ = "tukey";
  return f;
}

LossFamily LossFamily::custom(Evaluator eval, Evaluator deriv,
                              LossConstants constants, std::string name) {
  if (!eval) throw config_error("custom loss needs an evaluator");
  LossFamily f;
  f.kind_ = LossKind::custom;
  f.custom_eval_ = std::move(eval);
  f.custom_deriv_ = std::move(deriv);
  f.constants_ = constants;
  f.label_ = std::move(name);
  return f;
}

double LossFamily::threshold(int i) const {
  if (thresholds_.empty()) return 1.0;
  return thresholds_[std::size_t(i) < thresholds_.size() ? i : thresholds_.size() - 1];
}

double LossFamily::term_scale(int i) const {
  if (scale_.empty()) return 1.0;
  return scale_[std::size_t(i) < scale_.size() ? i : scale_.size() - 1];
}

double LossFamily::quad_coeff(int i) const {
  if (quad_.empty()) return 0.0;
  return quad_[std::size_t(i) < quad_.size() ? i : quad_.size() - 1];
}

double LossFamily::value(int i, double z) const {
  check_finite(z, "loss eval");
  double base = 0.0;
  switch (kind_) {
    case LossKind::power:
      base = powr(std::abs(z), p_);
      break;
    case LossKind::gamma:
    case LossKind::huber:
      base = gamma_value(p_, threshold(i), z);
      break;
    case LossKind::tukey_proxy: {
      const double az = std::abs(z);
      base = az <= 1.0 ? z * z : powr(az, 2.0 * eta_);
      break;
    }
    case LossKind::tukey: {
      const double q = z * z;
      base = q < 1.0 ? q : 1.0;
      break;
    }
    case LossKind::custom:
      base = custom_eval_(i, z);
      break;
  }
  double v = term_scale(i) * base;
  if (!quad_.empty()) v += quad_coeff(i) * z * z;
  return v;
}

double LossFamily::sqrt_value(int i, double z) const {
  return std::sqrt(value(i, z));
}

double LossFamily::deriv(int i, double z) const {
  check_finite(z, "loss deriv");
  if (!differentiable_at(i, z))
    throw numeric_error(label_ + ": not differentiable at z=" + std::to_string(z));
  double base = 0.0;
  switch (kind_) {
    case LossKind::power:
      base = (z == 0.0) ? 0.0
                        : p_ * powr(std::abs(z), p_ - 1.0) * (z > 0.0 ? 1.0 : -1.0);
      break;
    case LossKind::gamma:
    case LossKind::huber:
      base = gamma_deriv(p_, threshold(i), z);
      break;
    case LossKind::tukey_proxy: {
      const double az = std::abs(z);
      base = az <= 1.0 ? 2.0 * z
                       : 2.0 * eta_ * powr(az, 2.0 * eta_ - 1.0) * (z > 0.0 ? 1.0 : -1.0);
      break;
    }
    case LossKind::tukey:
      base = std::abs(z) < 1.0 ? 2.0 * z : 0.0;
      break;
    case LossKind::custom: {
      if (custom_deriv_) {
        base = custom_deriv_(i, z);
      } else {
        const double h = 1e-6 * std::max(1.0, std::abs(z));
        base = (custom_eval_(i, z + h) - custom_eval_(i, z - h)) / (2.0 * h);
      }
      break;
    }
  }
  double v = term_scale(i) * base;
  if (!quad_.empty()) v += 2.0 * quad_coeff(i) * z;
  return v;
}

double LossFamily::second(int i, double z) const {
  double base = 0.0;
  switch (kind_) {
    case LossKind::power: {
      const double az = std::max(std::abs(z), 1e-100);
      base = p_ * (p_ - 1.0) * powr(az, p_ - 2.0);
      break;
    }
    case LossKind::gamma:
    case LossKind::huber:
      base = gamma_second(p_, threshold(i), z);
      break;
    case LossKind::tukey_proxy: {
      const double az = std::abs(z);
      base = az <= 1.0
                 ? 2.0
                 : 2.0 * eta_ * (2.0 * eta_ - 1.0) * powr(az, 2.0 * eta_ - 2.0);
      break;
    }
    case LossKind::tukey:
      base = std::abs(z) < 1.0 ? 2.0 : 0.0;
      break;
    case LossKind::custom: {
      const double h = 1e-5 * std::max(1.0, std::abs(z));
      base = (custom_eval_(i, z + h) - 2.0 * custom_eval_(i, z) +
              custom_eval_(i, z - h)) /
             (h * h);
      break;
    }
  }
  double v = term_scale(i) * base;
  if (!quad_.empty()) v += 2.0 * quad_coeff(i);
  return v;
}

bool LossFamily::differentiable_at(int i, double z) const {
  (void)i;
  if (kind_ == LossKind::power && p_ <= 1.0 && z == 0.0) return false;
  return true;
}

bool LossFamily::refinable() const {
  return (kind_ == LossKind::power || kind_ == LossKind::gamma) && p_ > 1.0 &&
         p_ <= 2.0;
}

LossFamily LossFamily::with_term_scales(std::vector<double> scale) const {
  for (double s : scale)
    if (!(s > 0.0)) throw config_error("term scales must be positive");
  LossFamily f = *this;
  f.scale_ = std::move(scale);
  return f;
}

LossFamily LossFamily::with_quad(std::vector<double> quad) const {
  for (double q : quad)
    if (!(q >= 0.0)) throw config_error("quadratic perturbation must be nonnegative");
  LossFamily f = *this;
  f.quad_ = std::move(quad);
  // The quadratic term keeps lower homogeneity and bumps the upper exponent
  // to 2; sqrt of a sum of squares keeps L >= 1.
  f.constants_.L = std::max(1.0, f.constants_.L);
  f.constants_.u = 2.0;
  f.constants_.C = std::max(1.0, f.constants_.C);
  return f;
}

LossFamily LossFamily::without_quad() const {
  LossFamily f = *this;
  f.quad_.clear();
  return f;
}

LossFamily LossFamily::select_terms(std::span<const int> idx) const {
  LossFamily f = *this;
  auto subset = [&](const std::vector<double>& src) {
    std::vector<double> out;
    if (src.empty()) return out;
    out.reserve(idx.size());
    for (int i : idx)
      out.push_back(src[std::size_t(i) < src.size() ? i : src.size() - 1]);
    return out;
  };
  f.thresholds_ = subset(thresholds_);
  f.scale_ = subset(scale_);
  f.quad_ = subset(quad_);
  if (kind_ == LossKind::custom) {
    std::vector<int> map(idx.begin(), idx.end());
    Evaluator base_eval = custom_eval_, base_deriv = custom_deriv_;
    f.custom_eval_ = [map, base_eval](int i, double z) {
      return base_eval(map[i], z);
    };
    if (base_deriv)
      f.custom_deriv_ = [map, base_deriv](int i, double z) {
        return base_deriv(map[i], z);
      };
  }
  return f;
}

double eval_divergence(const LossFamily& fam, int i, double z0, double d) {
  check_finite(z0, "divergence");
  check_finite(d, "divergence");
  const double g = fam.deriv(i, z0);  // throws when non-differentiable
  return fam.value(i, z0 + d) - fam.value(i, z0) - g * d;
}

namespace {

// Probe ratios D^f_{z0}(z0+d) / gamma_p(max(t,|z0|), d) over a quarter-octave
// log grid plus the analytic d->0 limits, then widen by a small margin for
// the grid gaps.  By p-homogeneous scaling the ratio depends only on
// d/max(t,|z0|) and the regime of z0, so t = 1 covers everything.
EquivConstants measure_equivalence(LossKind kind, double p) {
  EquivConstants eq;
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  auto take = [&](double r) {
    if (!std::isfinite(r) || r <= 0.0) return;
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  };

  // d -> 0 limits: f''(z0) / (p T^{p-2}) with T = max(t, |z0|)
  take(1.0);          // quadratic region of gamma, or z0 = 0
  take(p - 1.0);      // tail region

  std::vector<double> z0s;
  if (kind == LossKind::power) {
    z0s = {0.0, 1.0};
  } else {
    z0s = {0.0};
    for (int k = -40; k <= 40; ++k) z0s.push_back(std::pow(2.0, 0.25 * k));
  }
  const double t = (kind == LossKind::power) ? 0.0 : 1.0;
  LossFamily probe = (kind == LossKind::power)
                         ? LossFamily::power(p)
                         : LossFamily::gamma(p, {t});

  for (double z0 : z0s) {
    const double ref = std::max(t, std::abs(z0));
    const double unit = std::max(ref, 1.0);
    for (int k = -40; k <= 56; ++k) {
      for (int sgn = -1; sgn <= 1; sgn += 2) {
        const double d = sgn * unit * std::pow(2.0, 0.25 * k);
        const double shape = gamma_value(p, ref, d);
        if (shape <= 0.0) continue;
        take(eval_divergence(probe, 0, z0, d) / shape);
      }
    }
  }
  if (hi / lo - 1.0 < 1e-8) {
    // constant ratio up to rounding noise (p = 2: the divergence IS the shape)
    const double mid = 0.5 * (hi + lo);
    eq.lower = eq.upper = std::abs(mid - 1.0) < 1e-8 ? 1.0 : mid;
    return eq;
  }
  // widen for the gaps of the probe grid
  eq.lower = lo * (1.0 - 5e-3);
  eq.upper = hi * (1.0 + 5e-3);
  return eq;
}

}  // namespace

EquivConstants divergence_equivalence(LossKind kind, double p) {
  if (kind == LossKind::huber) kind = LossKind::gamma;
  if (kind != LossKind::power && kind != LossKind::gamma)
    throw config_error("divergence equivalence defined for power/gamma only");
  static std::map<std::pair<int, double>, EquivConstants> cache;
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  auto key = std::make_pair(int(kind), p);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  EquivConstants eq = measure_equivalence(kind, p);
  cache[key] = eq;
  return eq;
}

DivergenceSurrogate divergence_surrogate(const LossFamily& fam, int i,
                                         double z0) {
  if (!fam.refinable())
    throw config_error(
        "divergence surrogate needs power or gamma losses with p in (1,2]");
  if (fam.has_quad())
    throw config_error("divergence surrogate on perturbed family");
  check_finite(z0, "divergence surrogate");

  const double p = fam.p();
  const double t_eff = (fam.kind() == LossKind::power) ? 0.0 : fam.threshold(i);
  const EquivConstants eq = divergence_equivalence(fam.kind(), p);

  DivergenceSurrogate s;
  s.center = z0;
  s.threshold = std::max(t_eff, std::abs(z0));
  s.p = p;
  s.scale = fam.term_scale(i) * eq.lower;
  s.alpha = eq.upper / eq.lower;
  s.theta = p;
  s.c = 1.0;
  s.L = 1.0;
  return s;
}

std::vector<double> GridSpec::z_grid() const {
  std::vector<double> g;
  g.push_back(0.0);
  for (int k = z_kmin; k <= z_kmax; ++k) {
    const double z = std::ldexp(1.0, k);
    g.push_back(z);
    g.push_back(-z);
  }
  return g;
}

std::vector<double> GridSpec::lambda_grid() const {
  std::vector<double> g;
  for (int k = 0; k <= lambda_kmax; ++k) g.push_back(std::ldexp(1.0, k));
  return g;
}

PropertyCertificate certify_properties(const LossFamily& fam, int term,
                                       const GridSpec& grid) {
  const std::vector<double> zs = grid.z_grid();
  const std::vector<double> lams = grid.lambda_grid();
  if (zs.empty() || lams.empty()) throw config_error("empty certification grid");
  const double tol = grid.tol;
  const LossConstants& k = fam.constants();
  const double ch = std::sqrt(k.c);
  const double th_h = 0.5 * k.theta;
  const double Ch = std::sqrt(k.C);
  const double uh = 0.5 * k.u;

  PropertyCertificate cert;
  auto h = [&](double z) { return fam.sqrt_value(term, z); };
  auto update = [&](PropertyCheck& chk, double num, double den, double z,
                    double aux) {
    // violated when num > den beyond tolerance; ratio 0/0 counts as fine
    double ratio;
    if (den > 0.0) {
      ratio = num / den;
    } else {
      ratio = (num > 0.0) ? std::numeric_limits<double>::infinity() : 0.0;
    }
    if (ratio > chk.worst_ratio) {
      chk.worst_ratio = ratio;
      chk.witness_z = z;
      chk.witness_aux = aux;
    }
    if (ratio > 1.0 + tol) chk.pass = false;
  };

  for (double z : zs) {
    const double hz = h(z);
    // (P3) symmetry
    update(cert.symmetric, hz, k.K * h(-z), z, -z);
    for (double z2 : zs) {
      // (P1) auto-Lipschitz
      update(cert.auto_lipschitz, std::abs(hz - h(z2)), k.L * h(z - z2), z, z2);
    }
    for (double lam : lams) {
      const double hlz = h(lam * z);
      // (P2) lower homogeneity of h
      update(cert.lower_homog, ch * std::pow(lam, th_h) * hz, hlz, z, lam);
      // (P4) monotonicity with constant 1/c_h
      update(cert.monotone, ch * hz, hlz, z, lam);
      // (P5) upper homogeneity of h
      update(cert.upper_homog, hlz, Ch * std::pow(lam, uh) * hz, z, lam);
    }
  }

  // derivative consistency, skipping kinks with a guard band
  cert.deriv_consistency.pass = true;
  if (fam.kind() != LossKind::custom) {
    for (double z : zs) {
      if (!fam.differentiable_at(term, z)) continue;
      if (fam.kind() == LossKind::power && fam.p() < 2.0 && std::abs(z) < 1e-6)
        continue;  // second derivative blows up, central difference useless
      double kink = std::numeric_limits<double>::infinity();
      if (fam.kind() == LossKind::gamma || fam.kind() == LossKind::huber)
        kink = fam.threshold(term);
      else if (fam.kind() == LossKind::tukey_proxy || fam.kind() == LossKind::tukey)
        kink = 1.0;
      if (std::isfinite(kink) &&
          std::abs(std::abs(z) - kink) <= 1e-12 * std::max(1.0, kink))
        continue;
      const double step = 1e-7 * std::max(std::abs(z), 1e-3);
      if (std::isfinite(kink) && std::abs(std::abs(z) - kink) <= 2.0 * step)
        continue;
      const double fd =
          (fam.value(term, z + step) - fam.value(term, z - step)) / (2.0 * step);
      const double an = fam.deriv(term, z);
      const double scale = std::max({std::abs(an), std::abs(fd), 1e-12});
      update(cert.deriv_consistency, std::abs(fd - an), 1e-6 * scale, z, step);
    }
  }

  cert.pass = cert.auto_lipschitz.pass && cert.lower_homog.pass &&
              cert.symmetric.pass && cert.monotone.pass &&
              cert.upper_homog.pass && cert.deriv_consistency.pass;
  return cert;
}

}  // namespace glms
