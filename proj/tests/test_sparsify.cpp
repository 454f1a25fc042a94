#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "glms/errors.hpp"
#include "glms/sparsify.hpp"
#include "support/reference.hpp"

using namespace glms;

namespace {

ProblemInstance identity_instance(int n, LossFamily fam) {
  std::vector<double> d(std::size_t(n) * n, 0.0);
  for (int i = 0; i < n; ++i) d[std::size_t(i) * n + i] = 1.0;
  return ProblemInstance{RowMatrix(n, n, std::move(d)), {}, std::move(fam)};
}

WeightScheme scheme_for(const ProblemInstance& inst, double smin, double smax,
                        uint64_t seed) {
  const int m = inst.m();
  const int jmax = int(std::ceil(std::log2(smax)));
  const int jmin = int(std::floor(std::log2(smin))) -
                   int(std::ceil(4.0 * std::log2(std::max(m, 2))));
  InitialWeights iw = initial_weights(inst.A, inst.family, smax, 0.5, 1e-8, seed);
  return find_weights(inst.A, iw.perturbed, jmin, jmax, iw.w0, iw.beta, 0.1,
                      seed + 1);
}

std::vector<double> scaled(const std::vector<double>& x, double lam) {
  std::vector<double> y(x);
  for (double& v : y) v *= lam;
  return y;
}

}  // namespace

TEST_CASE("sampling plan basics") {
  // p = 2, identity rows: uniform by symmetry
  ProblemInstance eye = identity_instance(5, LossFamily::power(2.0));
  WeightScheme s = scheme_for(eye, 1.0, 16.0, 3);
  std::vector<double> rho = sampling_plan(s);
  for (double r : rho) CHECK(r == doctest::Approx(0.2).epsilon(1e-9));

  // p = 2 on a random tall matrix: normalized leverage scores
  ProblemInstance rnd{testref::random_matrix(40, 4, 9), {}, LossFamily::power(2.0)};
  WeightScheme s2 = scheme_for(rnd, 1.0, 16.0, 5);
  std::vector<double> rho2 = sampling_plan(s2);
  std::vector<double> ones(40, 1.0);
  LeverageResult lev = leverage_exact(rnd.A, ones);
  for (int i = 0; i < 40; ++i)
    CHECK(rho2[i] == doctest::Approx(lev.sigma[i] / 4.0).epsilon(1e-6));

  // duplicated rows in R^1 share the sampling mass
  ProblemInstance dup{RowMatrix(2, 1, {3.0, 3.0}), {}, LossFamily::huber()};
  WeightScheme s3 = scheme_for(dup, 0.5, 8.0, 7);
  std::vector<double> rho3 = sampling_plan(s3);
  CHECK(rho3[0] == doctest::Approx(rho3[1]).epsilon(1e-12));
}

TEST_CASE("sparsify_once validations") {
  ProblemInstance eye = identity_instance(4, LossFamily::power(2.0));
  WeightScheme s = scheme_for(eye, 1.0, 16.0, 3);
  SparsifyConfig cfg;
  cfg.smin = 1.0;
  cfg.smax = 16.0;
  cfg.seed = 1;

  cfg.eps = 0.6;
  CHECK_THROWS_AS((void)sparsify_once(eye, s, cfg), config_error);
  cfg.eps = 0.2;
  cfg.budget_override = std::size_t(0);
  CHECK_THROWS_AS((void)sparsify_once(eye, s, cfg), config_error);
  cfg.budget_override.reset();

  // scale range outside the scheme coverage
  cfg.smax = 1e9;
  CHECK_THROWS_AS((void)sparsify_once(eye, s, cfg), config_error);
  cfg.smax = 16.0;

  SparsifiedModel model = sparsify_once(eye, s, cfg);
  CHECK(model.support() <= model.sample_count);
  CHECK(model.support() >= 1);
  for (double w : model.weights) CHECK(w >= 0.0);
}

TEST_CASE("monte-carlo unbiasedness of the sampled objective") {
  ProblemInstance inst{testref::random_matrix(60, 4, 21), {},
                       LossFamily::gamma(1.5, {1.0})};
  WeightScheme s = scheme_for(inst, 1.0, 256.0, 5);
  std::vector<double> rho = sampling_plan(s);
  SplitRng rng(31);
  std::vector<double> x(4);
  for (double& v : x) v = rng.next_gaussian();
  McProbe p = unbiasedness_probe(inst, rho, 500, x, 4000, 17);
  CHECK(p.se > 0.0);
  CHECK(std::abs(p.z_score) <= 3.0);
}

TEST_CASE("identity instance: no compression, near-unit weights") {
  const int n = 12;
  ProblemInstance eye = identity_instance(n, LossFamily::power(2.0));
  SparsifyConfig cfg;
  cfg.eps = 0.2;
  cfg.smin = 0.5;
  cfg.smax = 32.0;
  cfg.seed = 11;
  SparsifiedModel model = sparsify(eye, cfg);
  CHECK(model.support() == std::size_t(n));
  for (double w : model.weights) CHECK(w == doctest::Approx(1.0).epsilon(cfg.eps));
  AuditReport rep = audit_sparsifier(eye, model, 64, 12, 3);
  CHECK(rep.max_rel_err <= cfg.eps);
}

TEST_CASE("sparsifier accuracy on a random instance (p=2)") {
  ProblemInstance inst{testref::random_matrix(200, 5, 41), {},
                       LossFamily::power(2.0)};
  SparsifyConfig cfg;
  cfg.eps = 0.1;
  cfg.smin = 1.0;
  cfg.smax = 1e4;
  cfg.seed = 13;
  SparsifiedModel model = sparsify(inst, cfg);
  AuditReport rep = audit_sparsifier(inst, model, 128, 16, 5);
  CHECK(rep.max_rel_err <= 0.1);
  CHECK(rep.c_xi <= 20.0);
}

TEST_CASE("bootstrap rounds honor the stacked error budget") {
  ProblemInstance inst{testref::random_matrix(150, 4, 51), {},
                       LossFamily::gamma(1.5, {1.0})};
  SparsifyConfig cfg;
  cfg.eps = 0.15;
  cfg.smin = 1.0;
  cfg.smax = 1e3;
  cfg.seed = 7;
  cfg.bootstrap_rounds = 2;
  SparsifiedModel model = sparsify(inst, cfg);
  AuditReport rep = audit_sparsifier(inst, model, 96, 12, 9);
  // rounds at eps/3 and eps stack to at most (4/3) eps
  CHECK(rep.max_rel_err <= cfg.eps * 4.0 / 3.0);
  CHECK(model.support() >= 1);
}

TEST_CASE("starved budgets still compose across bootstrap rounds") {
  // a tiny override forces real subsampling, so the second round runs on a
  // short, possibly rank-deficient row subset
  ProblemInstance inst{testref::random_matrix(100, 4, 105), {},
                       LossFamily::power(1.5)};
  SparsifyConfig cfg;
  cfg.eps = 0.3;
  cfg.smin = 1.0;
  cfg.smax = 100.0;
  cfg.seed = 9;
  cfg.bootstrap_rounds = 2;
  cfg.budget_override = std::size_t(30);
  cfg.audit = false;
  SparsifiedModel m = sparsify(inst, cfg);
  CHECK(m.support() >= 1);
  CHECK(m.support() <= 30);
  for (double w : m.weights) CHECK(w > 0.0);
  std::vector<double> x{0.3, -0.7, 1.1, 0.2};
  CHECK(std::isfinite(m.eval(inst, x)));
}

TEST_CASE("determinism: identical config and seed give identical models") {
  ProblemInstance inst{testref::random_matrix(80, 3, 61), {}, LossFamily::huber()};
  SparsifyConfig cfg;
  cfg.eps = 0.2;
  cfg.smin = 0.5;
  cfg.smax = 8.0 * 80 * 80 * 80;
  cfg.seed = 23;
  SparsifiedModel m1 = sparsify(inst, cfg);
  SparsifiedModel m2 = sparsify(inst, cfg);
  REQUIRE(m1.indices == m2.indices);
  for (std::size_t i = 0; i < m1.weights.size(); ++i)
    CHECK(m1.weights[i] == m2.weights[i]);
  cfg.seed = 24;
  SparsifiedModel m3 = sparsify(inst, cfg);
  const bool same = m1.indices == m3.indices && m1.weights == m3.weights;
  CHECK_FALSE(same);
}

TEST_CASE("huber globalization: preconditions and audited extension") {
  const int m = 96, n = 3;
  ProblemInstance inst{testref::random_matrix(m, n, 71), {}, LossFamily::huber()};
  SparsifyConfig cfg;
  cfg.eps = 0.2;
  cfg.smin = 0.5;
  cfg.smax = 8.0 * m * m * m;
  cfg.seed = 5;
  SparsifiedModel model = sparsify(inst, cfg);

  SUBCASE("eps below 1/m is rejected") {
    SparsifyConfig bad = cfg;
    bad.eps = 1.0 / (2.0 * m);
    CHECK_THROWS_AS((void)huber_globalize(model, inst, bad), config_error);
  }
  SUBCASE("wrong scale range is rejected") {
    SparsifyConfig bad = cfg;
    bad.smax = 100.0;
    CHECK_THROWS_AS((void)huber_globalize(model, inst, bad), config_error);
  }
  SUBCASE("wrong family is rejected") {
    ProblemInstance p2{inst.A, {}, LossFamily::power(2.0)};
    CHECK_THROWS_AS((void)huber_globalize(model, p2, cfg), config_error);
  }
  SUBCASE("globalized model is accurate far outside the built range") {
    SparsifiedModel g = huber_globalize(model, inst, cfg);
    CHECK(g.global);
    double wmax = 0.0;
    for (double w : g.weights) wmax = std::max(wmax, w);
    CHECK(wmax <= 2.0 * m);
    // random points scaled to land outside [smin, smax]
    SplitRng rng(77);
    int outside = 0;
    double worst = 0.0;
    for (int t = 0; t < 10; ++t) {
      std::vector<double> x(n);
      for (double& v : x) v = rng.next_gaussian();
      double lam = 1.0;
      while (inst.value(scaled(x, lam)) > cfg.smin / 4.0) lam *= 0.5;
      double fv = inst.value(scaled(x, lam));
      double fa = g.eval(inst, scaled(x, lam));
      if (fv > 0) {
        worst = std::max(worst, std::abs(fv - fa) / fv);
        ++outside;
      }
      lam = 1.0;
      while (inst.value(scaled(x, lam)) < cfg.smax * 4.0) lam *= 2.0;
      fv = inst.value(scaled(x, lam));
      fa = g.eval(inst, scaled(x, lam));
      worst = std::max(worst, std::abs(fv - fa) / fv);
      ++outside;
    }
    CHECK(outside >= 10);
    CHECK(worst <= 2.0 * cfg.eps);
  }
}

TEST_CASE("tukey sampling through the proxy scheme") {
  const int m = 128, n = 4;
  ProblemInstance inst{testref::random_matrix(m, n, 81), {}, LossFamily::tukey()};
  SparsifyConfig cfg;
  cfg.eps = 0.3;
  cfg.seed = 9;

  CHECK_THROWS_AS((void)tukey_sparsify(inst, cfg, 0.0, 16.0), config_error);
  CHECK_THROWS_AS((void)tukey_sparsify(inst, cfg, 1e-9, 16.0), config_error);

  const double row_bound = 4.0 * std::pow(double(n), 4.0);
  const double x_bound = double(n) * n;
  SparsifiedModel model = tukey_sparsify(inst, cfg, row_bound, x_bound);
  CHECK(model.x_norm_bound == x_bound);
  AuditReport rep = audit_sparsifier(inst, model, 96, 12, 11);
  CHECK(rep.max_rel_err <= 1.5 * cfg.eps);

  // the eta = 1 proxy is plain |z|^2, agreeing with the bounded loss inside
  // the unit band
  LossFamily proxy = LossFamily::tukey_proxy(1.0);
  LossFamily raw = LossFamily::tukey();
  for (double z : {-3.0, -0.5, 0.2, 0.9, 10.0}) {
    CHECK(proxy.value(0, z) == doctest::Approx(z * z).epsilon(1e-12));
    if (std::abs(z) <= 1.0)
      CHECK(proxy.value(0, z) == doctest::Approx(raw.value(0, z)).epsilon(1e-12));
  }

  // sparsify() refuses the raw bounded loss
  SparsifyConfig scfg;
  scfg.eps = 0.2;
  scfg.smin = 0.5;
  scfg.smax = 100.0;
  CHECK_THROWS_AS((void)sparsify(inst, scfg), config_error);
}

TEST_CASE("audit sweeps shifted instances through the lifted encoding") {
  const int m = 60, n = 3;
  RowMatrix a = testref::random_matrix(m, n, 91);
  SplitRng rng(92);
  std::vector<double> b(m);
  for (double& v : b) v = rng.next_gaussian();
  ProblemInstance inst{a, b, LossFamily::gamma(1.5, {1.0})};
  SparsifyConfig cfg;
  cfg.eps = 0.2;
  cfg.smin = 1.0;
  cfg.smax = 1e3;
  cfg.seed = 15;
  SparsifiedModel model = sparsify(inst, cfg);
  AuditReport rep = audit_sparsifier(inst, model, 80, 12, 17);
  CHECK(rep.max_rel_err <= cfg.eps);

  // the lifted model evaluated at (x, -1) equals the shifted evaluation at x
  ProblemInstance lifted = lift_shift(inst);
  std::vector<double> x(n);
  for (double& v : x) v = rng.next_gaussian();
  std::vector<double> xl(x);
  xl.push_back(-1.0);
  CHECK(model.eval(inst, x) ==
        doctest::Approx(model.eval(lifted, xl)).epsilon(1e-14));
  CHECK(inst.value(x) == doctest::Approx(lifted.value(xl)).epsilon(1e-14));
}

TEST_CASE("auditing the full objective reports zero error") {
  ProblemInstance inst{testref::random_matrix(50, 3, 101), {},
                       LossFamily::gamma(1.5, {1.0})};
  SparsifiedModel full;
  full.indices.resize(50);
  for (int i = 0; i < 50; ++i) full.indices[i] = i;
  full.weights.assign(50, 1.0);
  full.smin = 1.0;
  full.smax = 1e4;
  full.eps = 0.1;
  AuditReport rep = audit_sparsifier(inst, full, 48, 8, 3);
  CHECK(rep.max_rel_err == 0.0);
}

TEST_CASE("large huber instance stays under the support-size formula") {
  // support <= (n/eps^2) log(n/eps smax/smin) (log S)^3,
  // S = (n/eps) log(2 smax/smin), checked as an inequality
  const int m = 4096, n = 8;
  const double eps = 0.2;
  ProblemInstance inst{testref::random_matrix(m, n, 111), {}, LossFamily::huber()};
  SparsifyConfig cfg;
  cfg.eps = eps;
  cfg.smin = 0.5;
  cfg.smax = 8.0 * double(m) * m * m;
  cfg.seed = 29;
  cfg.threads = 2;
  SparsifiedModel model = sparsify(inst, cfg);
  const double s_big = n / eps * std::log(2.0 * cfg.smax / cfg.smin);
  const double bound = n / (eps * eps) *
                       std::log(n / eps * cfg.smax / cfg.smin) *
                       std::pow(std::log(s_big), 3.0);
  MESSAGE("support=" << model.support() << " M=" << model.sample_count
                     << " bound=" << std::size_t(bound));
  CHECK(double(model.support()) <= bound);
  CHECK(model.support() <= std::size_t(m));
}

TEST_CASE("audit is deterministic across thread counts") {
  ProblemInstance inst{testref::random_matrix(90, 4, 95), {},
                       LossFamily::power(1.5)};
  SparsifyConfig cfg;
  cfg.eps = 0.2;
  cfg.smin = 1.0;
  cfg.smax = 100.0;
  cfg.seed = 19;
  SparsifiedModel model = sparsify(inst, cfg);
  AuditReport r1 = audit_sparsifier(inst, model, 64, 8, 5, 1);
  AuditReport r2 = audit_sparsifier(inst, model, 64, 8, 5, 2);
  AuditReport r8 = audit_sparsifier(inst, model, 64, 8, 5, 8);
  CHECK(r1.max_rel_err == r2.max_rel_err);
  CHECK(r1.max_rel_err == r8.max_rel_err);
  CHECK(r1.c_xi == r8.c_xi);
  for (std::size_t k = 0; k < r1.sens_sum.size(); ++k)
    CHECK(r1.sens_sum[k] == r8.sens_sum[k]);
}
