#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "glms/errors.hpp"
#include "glms/loss.hpp"
#include "support/reference.hpp"

using namespace glms;

TEST_CASE("threshold-form loss values") {
  LossFamily g2 = LossFamily::gamma(2.0, {1.0});
  CHECK(g2.value(0, 0.7) == doctest::Approx(0.49));  // both branches coincide

  LossFamily g1 = LossFamily::gamma(1.0, {1.0});
  CHECK(g1.value(0, 0.5) == doctest::Approx(0.125));
  // continuity at the threshold from both branches
  CHECK(g1.value(0, 1.0) == doctest::Approx(0.5));
  CHECK(gamma_value(1.0, 1.0, std::nextafter(1.0, 2.0)) == doctest::Approx(0.5));

  LossFamily tp = LossFamily::tukey_proxy(0.5);
  CHECK(tp.value(0, 4.0) == doctest::Approx(4.0));  // (4^0.5)^2

  // gamma_2(t, z) = z^2 for every threshold
  for (double t : {0.1, 1.0, 10.0, 1e4})
    for (double z : {-3.0, -0.2, 0.5, 7.0, 1e3})
      CHECK(gamma_value(2.0, t, z) == doctest::Approx(z * z).epsilon(1e-14));
}

TEST_CASE("derivatives agree with central differences away from kinks") {
  for (const LossFamily& fam :
       {LossFamily::power(1.5), LossFamily::gamma(1.3, {2.0}),
        LossFamily::huber(), LossFamily::tukey_proxy(0.7)}) {
    for (double z : {-7.3, -0.81, 0.33, 0.9, 3.7, 42.0}) {
      const double h = 1e-7 * std::max(1.0, std::abs(z));
      const double fd = (fam.value(0, z + h) - fam.value(0, z - h)) / (2 * h);
      CHECK(fam.deriv(0, z) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("divergence basics and errors") {
  LossFamily p2 = LossFamily::power(2.0);
  CHECK(eval_divergence(p2, 0, 3.0, 1.0) == doctest::Approx(1.0));

  LossFamily p15 = LossFamily::power(1.5);
  CHECK(eval_divergence(p15, 0, 1.0, 0.0) == doctest::Approx(0.0));

  LossFamily p1 = LossFamily::power(1.0);
  CHECK_THROWS_AS((void)eval_divergence(p1, 0, 0.0, 1.0), numeric_error);
  CHECK_THROWS_AS((void)p2.value(0, std::numeric_limits<double>::infinity()),
                  config_error);

  // nonnegativity over a grid for the convex families
  for (const LossFamily& fam :
       {LossFamily::power(1.7), LossFamily::gamma(1.5, {1.0}), LossFamily::huber()}) {
    for (double z0 : {-8.0, -1.0, -0.1, 0.0, 0.4, 2.0, 100.0})
      for (double d : {-50.0, -1.0, -1e-3, 1e-3, 0.8, 25.0})
        CHECK(eval_divergence(fam, 0, z0, d) >= -1e-12);
  }
}

TEST_CASE("divergence matches Simpson quadrature for the threshold form") {
  LossFamily g = LossFamily::gamma(1.5, {1.0});
  for (double z0 : {-2.0, -0.6, 0.0, 0.3, 1.7})
    for (double d : {-3.0, -1.1, -0.2, 0.4, 2.5}) {
      const double want = testref::simpson_divergence(1.5, 1.0, z0, d, 2000);
      CHECK(eval_divergence(g, 0, z0, d) == doctest::Approx(want).epsilon(1e-9));
    }
  // a fixed point checked against the quadrature oracle
  const double v = eval_divergence(g, 0, 2.0, -1.0);
  CHECK(std::abs(v - testref::simpson_divergence(1.5, 1.0, 2.0, -1.0)) <= 1e-8);
}

TEST_CASE("divergence surrogate: shapes, sandwich, measured alpha") {
  // p = 2: the surrogate is exactly the squared step
  LossFamily p2 = LossFamily::power(2.0);
  DivergenceSurrogate s2 = divergence_surrogate(p2, 0, 5.0);
  CHECK(s2.alpha == doctest::Approx(1.0));
  for (double d : {-3.0, 0.5, 11.0})
    CHECK(s2(d) == doctest::Approx(d * d).epsilon(1e-12));

  // p = 1.5 at center 0 degenerates to the pure power shape
  LossFamily p15 = LossFamily::power(1.5);
  DivergenceSurrogate s15 = divergence_surrogate(p15, 0, 0.0);
  CHECK(s15.threshold == 0.0);
  CHECK(s15(2.0) / s15(1.0) == doctest::Approx(std::pow(2.0, 1.5)));

  // sandwich r <= D <= alpha r on a wide grid, for several p and centers
  for (double p : {1.25, 1.5, 2.0}) {
    LossFamily pow_fam = LossFamily::power(p);
    LossFamily gam_fam = LossFamily::gamma(p, {1.0});
    for (double z0 : {0.0, 0.01, 0.5, 1.0, 7.0, 300.0}) {
      for (const LossFamily* fam : {&pow_fam, &gam_fam}) {
        if (fam->kind() == LossKind::power && z0 == 0.0) continue;
        DivergenceSurrogate s = divergence_surrogate(*fam, 0, z0);
        CHECK(s.alpha <= 10.0);
        CHECK(s.theta == doctest::Approx(p));
        for (int k = -10; k <= 10; ++k) {
          const double d = std::ldexp(std::max(1.0, std::abs(z0)), k);
          for (double sd : {d, -d}) {
            const double dv = eval_divergence(*fam, 0, z0, sd);
            const double r = s(sd);
            CHECK(dv >= r * (1.0 - 1e-9));
            CHECK(dv <= s.alpha * r * (1.0 + 1e-9));
          }
        }
      }
    }
  }

  // unsupported-refinement cases
  CHECK_THROWS_AS((void)divergence_surrogate(LossFamily::power(1.0), 0, 1.0),
                  config_error);
  CHECK_THROWS_AS((void)divergence_surrogate(LossFamily::huber(), 0, 1.0),
                  config_error);
}

TEST_CASE("measured equivalence constants track the curvature ratio") {
  for (double p : {1.25, 1.5, 1.75}) {
    EquivConstants eq = divergence_equivalence(LossKind::gamma, p);
    CHECK(eq.lower <= p - 1.0 + 1e-12);
    CHECK(eq.lower > 0.0);
    CHECK(eq.upper >= 1.0);
    CHECK(eq.upper / eq.lower <= 10.0);
  }
  EquivConstants e2 = divergence_equivalence(LossKind::power, 2.0);
  CHECK(e2.lower == doctest::Approx(1.0));
  CHECK(e2.upper == doctest::Approx(1.0));
}

TEST_CASE("property certification of the built-in families") {
  for (double p : {1.0, 1.25, 1.5, 2.0})
    for (double t : {0.1, 1.0, 10.0}) {
      PropertyCertificate cert = certify_properties(LossFamily::gamma(p, {t}));
      CHECK(cert.pass);
      CHECK(cert.auto_lipschitz.pass);
      CHECK(cert.lower_homog.pass);
    }
  CHECK(certify_properties(LossFamily::power(2.0)).pass);
  CHECK(certify_properties(LossFamily::power(1.0)).pass);
  CHECK(certify_properties(LossFamily::tukey_proxy(0.9)).pass);
}

TEST_CASE("asymmetric glued loss fails certification at large |z|") {
  // f(z) = z^2 for z >= 0, |z| for z < 0: the symmetry ratio grows without
  // bound, so any finite K fails on an unbounded grid.
  LossFamily glued = LossFamily::custom(
      [](int, double z) { return z >= 0 ? z * z : -z; },
      [](int, double z) { return z >= 0 ? 2 * z : -1.0; },
      LossConstants{1.0, 1.0, 1.0, 2.0, 1.0, 4.0}, "glued");
  PropertyCertificate cert = certify_properties(glued);
  CHECK_FALSE(cert.pass);
  CHECK_FALSE(cert.symmetric.pass);
  // the asymmetry ratio sqrt(|z|) diverges towards both grid extremes
  CHECK(std::abs(std::log2(std::abs(cert.symmetric.witness_z))) >= 19.0);
  CHECK(cert.symmetric.worst_ratio >= 100.0);
}

TEST_CASE("term scales and quadratic perturbations compose") {
  LossFamily base = LossFamily::gamma(1.5, {1.0, 2.0});
  LossFamily scaled = base.with_term_scales({2.0, 3.0});
  CHECK(scaled.value(0, 0.5) == doctest::Approx(2.0 * base.value(0, 0.5)));
  CHECK(scaled.value(1, 5.0) == doctest::Approx(3.0 * base.value(1, 5.0)));

  LossFamily pert = scaled.with_quad({0.25, 0.0});
  CHECK(pert.value(0, 2.0) ==
        doctest::Approx(2.0 * base.value(0, 2.0) + 0.25 * 4.0));
  CHECK(pert.constants().u == 2.0);

  std::vector<int> idx{1};
  LossFamily sub = pert.select_terms(idx);
  CHECK(sub.value(0, 5.0) == doctest::Approx(pert.value(1, 5.0)));
  CHECK(sub.threshold(0) == 2.0);
}

TEST_CASE("grid spec matches the documented defaults") {
  GridSpec g;
  const auto zs = g.z_grid();
  CHECK(zs.size() == 83);  // 0 plus +-2^k for k in -20..20
  const auto ls = g.lambda_grid();
  CHECK(ls.size() == 11);
  CHECK(ls.front() == 1.0);
  CHECK(ls.back() == 1024.0);
  GridSpec empty;
  empty.lambda_kmax = -1;
  CHECK_THROWS_AS((void)certify_properties(LossFamily::power(2.0), 0, empty),
                  config_error);
}
