#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace glms {

// Scalar loss families.  Growth certificates follow two conventions that the
// rest of the code relies on: L and K describe h = sqrt(f) (auto-Lipschitz
// and symmetry), while theta/c and u/C describe f itself (lower and upper
// homogeneity).
struct LossConstants {
  double L = 1.0;      // |h(z) - h(z')| <= L h(z - z')
  double theta = 1.0;  // f(lambda z) >= c lambda^theta f(z), lambda >= 1
  double c = 1.0;
  double u = 2.0;      // f(lambda z) <= C lambda^u f(z), lambda >= 1
  double C = 1.0;
  double K = 1.0;      // h(z) <= K h(-z)
};

enum class LossKind { power, gamma, huber, tukey_proxy, tukey, custom };

const char* loss_kind_name(LossKind k);

// Quadratic-to-power loss with threshold t: (p/2) t^{p-2} z^2 inside |z|<=t,
// |z|^p - (1-p/2) t^p outside.  t = 0 degenerates to the pure power |z|^p.
double gamma_value(double p, double t, double z);
double gamma_deriv(double p, double t, double z);
double gamma_second(double p, double t, double z);

class LossFamily {
 public:
  using Evaluator = std::function<double(int, double)>;

  LossFamily() = default;  // power(p=2); prefer the factories

  static LossFamily power(double p);
  static LossFamily gamma(double p, std::vector<double> thresholds = {});
  static LossFamily huber(std::vector<double> thresholds = {});
  static LossFamily tukey_proxy(double eta);
  static LossFamily tukey();
  static LossFamily custom(Evaluator eval, Evaluator deriv,
                           LossConstants constants, std::string name = "custom");

  LossKind kind() const { return kind_; }
  double p() const { return p_; }
  double eta() const { return eta_; }
  const LossConstants& constants() const { return constants_; }
  const std::vector<double>& thresholds() const { return thresholds_; }
  const std::string& label() const { return label_; }

  double threshold(int i) const;
  double term_scale(int i) const;
  double quad_coeff(int i) const;
  bool has_quad() const { return !quad_.empty(); }
  bool has_term_scales() const { return !scale_.empty(); }

  // f_i and derivatives, with per-term scale and quadratic perturbation
  // folded in.
  double value(int i, double z) const;
  double deriv(int i, double z) const;
  double second(int i, double z) const;
  double sqrt_value(int i, double z) const;

  bool differentiable_at(int i, double z) const;
  // True for kinds whose divergence admits the threshold-form surrogate with
  // theta > 1 (power/gamma, p in (1,2]).
  bool refinable() const;

  LossFamily with_term_scales(std::vector<double> scale) const;
  LossFamily with_quad(std::vector<double> quad) const;
  LossFamily without_quad() const;
  // Restrict per-term vectors (thresholds, scales, perturbations) to a row
  // subset, for sub-instances built from a support.
  LossFamily select_terms(std::span<const int> idx) const;

 private:
  LossKind kind_ = LossKind::power;
  double p_ = 2.0;
  double eta_ = 1.0;
  std::vector<double> thresholds_;  // empty => 1.0 everywhere (gamma kinds)
  std::vector<double> scale_;       // empty => 1.0
  std::vector<double> quad_;        // empty => 0.0
  LossConstants constants_;
  Evaluator custom_eval_, custom_deriv_;
  std::string label_;
};

// f_i(z0 + d) - f_i(z0) - f_i'(z0) d
double eval_divergence(const LossFamily& fam, int i, double z0, double d);

// Measured two-sided equivalence between the divergence of f at any center
// and the threshold-form shape gamma_p(max(t,|z0|), .).  Cached per (kind, p).
struct EquivConstants {
  double lower = 1.0;  // min over the probe grid of D / shape
  double upper = 1.0;  // max over the probe grid
};
EquivConstants divergence_equivalence(LossKind kind, double p);

struct DivergenceSurrogate {
  double center = 0.0;
  double threshold = 0.0;  // shape threshold: max(t_i, |z0|) (0 => pure power)
  double p = 2.0;
  double scale = 1.0;      // term scale times the measured lower constant
  double alpha = 1.0;      // sandwich constant: r <= D <= alpha r
  double theta = 2.0;      // lower homogeneity of r
  double c = 1.0;
  double L = 1.0;

  double operator()(double d) const {
    return scale * gamma_value(p, threshold, d);
  }
};

DivergenceSurrogate divergence_surrogate(const LossFamily& fam, int i,
                                         double z0);

// Certification grid defaults: |z| in {2^k : -20..20} plus sign flips and 0,
// lambda in {2^k : 0..10}, relative tolerance 1e-9.
struct GridSpec {
  int z_kmin = -20;
  int z_kmax = 20;
  int lambda_kmax = 10;
  double tol = 1e-9;
  std::vector<double> z_grid() const;
  std::vector<double> lambda_grid() const;
};

struct PropertyCheck {
  bool pass = true;
  double worst_ratio = 0.0;  // > 1 means violated beyond tolerance
  double witness_z = 0.0;
  double witness_aux = 0.0;  // second grid point or lambda
};

struct PropertyCertificate {
  PropertyCheck auto_lipschitz;  // (P1) on h with constant L
  PropertyCheck lower_homog;     // (P2) on h: c^{1/2} lambda^{theta/2}
  PropertyCheck symmetric;       // (P3) on h with constant K
  PropertyCheck monotone;        // (P4) on h with constant 1/sqrt(c)
  PropertyCheck upper_homog;     // (P5) on h: C^{1/2} lambda^{u/2}
  PropertyCheck deriv_consistency;  // central difference vs deriv(), away from kinks
  bool pass = false;
};

PropertyCertificate certify_properties(const LossFamily& fam, int term = 0,
                                       const GridSpec& grid = {});

}  // namespace glms
