#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "glms/dense.hpp"
#include "glms/errors.hpp"
#include "glms/leverage.hpp"
#include "glms/rng.hpp"
#include "glms/weights.hpp"
#include "support/reference.hpp"

using namespace glms;

TEST_CASE("symmetric eigendecomposition reconstructs the matrix") {
  SplitRng rng(3);
  for (int n : {1, 2, 5, 12, 24}) {
    std::vector<double> m_mat(std::size_t(n) * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j <= i; ++j) {
        const double v = rng.next_gaussian();
        m_mat[std::size_t(i) * n + j] = v;
        m_mat[std::size_t(j) * n + i] = v;
      }
    GramFactorization f(m_mat, n);
    CHECK(f.reconstruction_error() <= 1e-10);
  }
}

TEST_CASE("pseudo-inverse satisfies the Moore-Penrose identities") {
  // rank-2 PSD matrix in R^4
  const int n = 4;
  SplitRng rng(17);
  std::vector<double> u1(n), u2(n);
  for (double& v : u1) v = rng.next_gaussian();
  for (double& v : u2) v = rng.next_gaussian();
  std::vector<double> m_mat(std::size_t(n) * n, 0.0);
  kern::rank1_upper(m_mat.data(), u1.data(), 2.0, n);
  kern::rank1_upper(m_mat.data(), u2.data(), 5.0, n);
  kern::sym_mirror_lower(m_mat.data(), n);
  GramFactorization f(m_mat, n);
  CHECK(f.rank() == 2);

  // build P = M^+ column by column
  std::vector<double> pinv(std::size_t(n) * n);
  std::vector<double> e(n, 0.0), col(n);
  for (int j = 0; j < n; ++j) {
    std::fill(e.begin(), e.end(), 0.0);
    e[j] = 1.0;
    f.solve_pinv(e.data(), col.data());
    for (int i = 0; i < n; ++i) pinv[std::size_t(i) * n + j] = col[i];
  }
  auto matmul = [&](const std::vector<double>& x, const std::vector<double>& y) {
    std::vector<double> r(std::size_t(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
      for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
          r[std::size_t(i) * n + j] +=
              x[std::size_t(i) * n + k] * y[std::size_t(k) * n + j];
    return r;
  };
  const std::vector<double> mpm = matmul(matmul(m_mat, pinv), m_mat);
  const std::vector<double> pmp = matmul(matmul(pinv, m_mat), pinv);
  for (int i = 0; i < n * n; ++i) {
    CHECK(std::abs(mpm[i] - m_mat[i]) <= 1e-8 * (1.0 + std::abs(m_mat[i])));
    CHECK(std::abs(pmp[i] - pinv[i]) <= 1e-8 * (1.0 + std::abs(pinv[i])));
  }
}

TEST_CASE("gram assembly basics") {
  RowMatrix eye2(2, 2, {1, 0, 0, 1});
  std::vector<double> w{1, 1};
  GramFactorization f = gram(eye2, w);
  CHECK(f.rank() == 2);
  CHECK(f.matrix()[0] == 1.0);
  CHECK(f.matrix()[3] == 1.0);
  CHECK(f.matrix()[1] == 0.0);

  std::vector<double> w2{1, 0};
  GramFactorization g2 = gram(eye2, w2);
  CHECK(g2.rank() == 1);
  CHECK(g2.matrix()[0] == 1.0);
  CHECK(g2.matrix()[3] == 0.0);

  // rows (1,0) and (1,1) with weights (2,3): hand expansion of the sum
  RowMatrix a(2, 2, {1, 0, 1, 1});
  std::vector<double> w3{2, 3};
  GramFactorization g3 = gram(a, w3);
  CHECK(g3.matrix()[0] == doctest::Approx(5.0));
  CHECK(g3.matrix()[1] == doctest::Approx(3.0));
  CHECK(g3.matrix()[2] == doctest::Approx(3.0));
  CHECK(g3.matrix()[3] == doctest::Approx(3.0));
}

TEST_CASE("exact leverage scores: identity, duplicates, trace identity") {
  const int n = 6;
  std::vector<double> eye(std::size_t(n) * n, 0.0);
  for (int i = 0; i < n; ++i) eye[std::size_t(i) * n + i] = 1.0;
  RowMatrix a(n, n, eye);
  std::vector<double> w(n, 1.0);
  LeverageResult lr = leverage_exact(a, w);
  double sum = 0.0;
  for (double s : lr.sigma) {
    CHECK(s == doctest::Approx(1.0));
    sum += s;
  }
  CHECK(sum == doctest::Approx(double(n)));

  // two copies of e1 in R^1 share the score equally
  RowMatrix dup(2, 1, {1, 1});
  std::vector<double> wd{1, 1};
  LeverageResult lrd = leverage_exact(dup, wd);
  CHECK(lrd.sigma[0] == doctest::Approx(0.5));
  CHECK(lrd.sigma[1] == doctest::Approx(0.5));

  // random tall matrix: sum of scores equals the rank
  RowMatrix r = testref::random_matrix(50, 5, 99);
  SplitRng rng(100);
  std::vector<double> wr(50);
  for (double& v : wr) v = 0.1 + rng.next_double();
  LeverageResult lrr = leverage_exact(r, wr);
  double total = 0.0;
  for (double s : lrr.sigma) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
    total += s;
  }
  CHECK(std::abs(total - 5.0) <= 1e-8);
}

TEST_CASE("leverage scores are scale invariant; tau scales inversely") {
  RowMatrix a = testref::random_matrix(40, 4, 7);
  SplitRng rng(8);
  std::vector<double> w(40), wc(40);
  for (int i = 0; i < 40; ++i) {
    w[i] = 0.5 + rng.next_double();
    wc[i] = 3.7 * w[i];
  }
  LeverageResult l1 = leverage_exact(a, w);
  LeverageResult l2 = leverage_exact(a, wc);
  for (int i = 0; i < 40; ++i) {
    CHECK(l1.sigma[i] == doctest::Approx(l2.sigma[i]).epsilon(1e-12));
    CHECK(l1.tau[i] == doctest::Approx(3.7 * l2.tau[i]).epsilon(1e-12));
  }
}

TEST_CASE("leverage map is 1-Lipschitz in the log-ratio metric") {
  RowMatrix a = testref::random_matrix(30, 5, 21);
  SplitRng rng(22);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> w(30), w2(30);
    for (int i = 0; i < 30; ++i) {
      w[i] = std::exp(rng.next_gaussian());
      w2[i] = w[i] * std::exp(0.5 * rng.next_gaussian());
    }
    LeverageResult l1 = leverage_exact(a, w);
    LeverageResult l2 = leverage_exact(a, w2);
    CHECK(log_ratio_dist(l1.tau, l2.tau) <= log_ratio_dist(w, w2) + 1e-10);
  }
}

TEST_CASE("sketched leverage scores approximate the exact path") {
  const int n = 8;
  std::vector<double> eye(std::size_t(n) * n, 0.0);
  for (int i = 0; i < n; ++i) eye[std::size_t(i) * n + i] = 1.0;
  RowMatrix a(n, n, eye);
  std::vector<double> w(n, 1.0);
  std::vector<double> sk = leverage_sketch(a, w, 0.1, 4);
  for (double s : sk) {
    CHECK(s >= 1.0 / 1.1);
    CHECK(s <= 1.1);
  }

  RowMatrix r = testref::random_matrix(300, 6, 31);
  std::vector<double> wr(300, 1.0);
  LeverageResult ex = leverage_exact(r, wr);
  std::vector<double> ap = leverage_sketch(r, wr, 0.1, 5);
  for (int i = 0; i < 300; ++i) {
    const double ratio = ap[i] / ex.sigma[i];
    CHECK(ratio >= 1.0 / 1.1);
    CHECK(ratio <= 1.1);
  }

  // strongly anisotropic, correlated columns: catches whitening-orientation
  // mistakes that isotropic instances cannot see
  RowMatrix skew(3, 2, {1.0, 0.0, 1000.0, 1000.0, 0.0, 1.0});
  std::vector<double> ws(3, 1.0);
  LeverageResult exs = leverage_exact(skew, ws);
  std::vector<double> aps = leverage_sketch(skew, ws, 0.1, 6);
  for (int i = 0; i < 3; ++i) {
    const double ratio = aps[i] / exs.sigma[i];
    CHECK(ratio >= 1.0 / 1.1);
    CHECK(ratio <= 1.1);
  }

  CHECK_THROWS_AS((void)leverage_sketch(r, wr, 0.5, 1), config_error);
}

TEST_CASE("auto path: exact when the sketch would not be cheaper") {
  RowMatrix r = testref::random_matrix(80, 4, 41);
  std::vector<double> w(80, 1.0);
  const std::vector<double> a1 = leverage_auto(r, w, 0.1, 1);
  const std::vector<double> a2 = leverage_exact(r, w).sigma;
  for (int i = 0; i < 80; ++i) CHECK(a1[i] == a2[i]);
}
