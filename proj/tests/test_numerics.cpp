#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bnpc/numerics.hpp"
#include "oracles.hpp"

using namespace bnpc;

TEST_CASE("rng streams are reproducible and split deterministically") {
  RngStream a(5, 1), b(5, 1), c(5, 2);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto va = a();
    CHECK(va == b());
    differs |= va != c();
  }
  CHECK(differs);
  const RngStream parent(9, 0);
  RngStream s1 = parent.split(3), s2 = parent.split(3), s3 = parent.split(4);
  CHECK(s1() == s2());
  CHECK(s1() != s3());
}

TEST_CASE("distinct streams are uncorrelated") {
  RngStream a(11, 1), b(11, 2);
  std::vector<double> x, y;
  for (int i = 0; i < 20000; ++i) {
    x.push_back(a.normal());
    y.push_back(b.normal());
  }
  double cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) cov += x[i] * y[i];
  cov /= static_cast<double>(x.size());
  CHECK(std::abs(cov) < 4.0 / std::sqrt(20000.0));
}

TEST_CASE("rng state round trip") {
  RngStream a(3, 7);
  for (int i = 0; i < 10; ++i) a();
  const std::string st = a.state();
  const auto next = a();
  RngStream b(0, 0);
  b.set_state(st);
  CHECK(b() == next);
}

TEST_CASE("cholesky_solve") {
  const VectorXd b3 = (VectorXd(3) << 1, 2, 3).finished();
  CHECK((cholesky_solve(SymMatrix::identity(3), b3) - b3).norm() == doctest::Approx(0.0));
  const VectorXd d = cholesky_solve(SymMatrix::diagonal((VectorXd(2) << 2, 4).finished()), (VectorXd(2) << 2, 4).finished());
  CHECK(d(0) == doctest::Approx(1.0));
  CHECK(d(1) == doctest::Approx(1.0));
  RngStream rng(1, 0);
  MatrixXd m(5, 5);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  const MatrixXd a = m * m.transpose() + MatrixXd::Identity(5, 5);
  VectorXd b(5);
  for (int i = 0; i < 5; ++i) b(i) = rng.normal();
  const VectorXd x = cholesky_solve(SymMatrix(a), b);
  CHECK((a * x - b).norm() < 1e-10);
}

TEST_CASE("SymMatrix rejects asymmetric input") {
  MatrixXd m(2, 2);
  m << 1, 0.5, 0.4, 1;
  CHECK_THROWS_AS(SymMatrix{m}, Error);
  MatrixXd n(2, 2);
  n << 1, 2, 2, 1;
  CHECK_THROWS_AS(cholesky_solve(SymMatrix(n), VectorXd::Ones(2)), Error);
}

TEST_CASE("sample_mvn moments") {
  RngStream rng(2, 0);
  const VectorXd z = sample_mvn(VectorXd::Zero(3), SymMatrix(MatrixXd::Zero(3, 3)), rng);
  CHECK(z.norm() == 0.0);
  const int n = 100000;
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += sample_mvn(VectorXd::Constant(1, 5.0), SymMatrix(MatrixXd::Ones(1, 1)), rng)(0);
  CHECK(std::abs(s / n - 5.0) < 3.0 * std::sqrt(1.0 / n));
  std::vector<double> a, b;
  const SymMatrix cov = SymMatrix::diagonal((VectorXd(2) << 1, 4).finished());
  for (int i = 0; i < n; ++i) {
    const VectorXd v = sample_mvn(VectorXd::Zero(2), cov, rng);
    a.push_back(v(0));
    b.push_back(v(1));
  }
  CHECK(std::abs(oracle::var(a) / 1.0 - 1.0) < 0.05);
  CHECK(std::abs(oracle::var(b) / 4.0 - 1.0) < 0.05);
}

TEST_CASE("sample_dirichlet means") {
  RngStream rng(3, 0);
  const std::vector<double> one{1.0};
  CHECK(sample_dirichlet(one, rng)[0] == 1.0);
  for (const std::vector<double>& alpha : {std::vector<double>{1, 1, 1}, std::vector<double>{2, 1, 1}}) {
    const double a0 = alpha[0] + alpha[1] + alpha[2];
    std::vector<std::vector<double>> cols(3);
    for (int i = 0; i < 100000; ++i) {
      const auto w = sample_dirichlet(alpha, rng);
      for (int j = 0; j < 3; ++j) cols[static_cast<std::size_t>(j)].push_back(w[static_cast<std::size_t>(j)]);
    }
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK(std::abs(oracle::mean(cols[j]) - alpha[j] / a0) < 3.0 * oracle::mc_se(cols[j]));
    }
  }
}

TEST_CASE("truncated normal") {
  RngStream rng(4, 0);
  for (int i = 0; i < 1000; ++i) CHECK(sample_truncated_normal(0, 1, TruncationSide::Left, 0, rng) < 0.0);
  std::vector<double> v;
  for (int i = 0; i < 100000; ++i) v.push_back(sample_truncated_normal(0, 1, TruncationSide::Right, 0, rng));
  CHECK(std::abs(oracle::mean(v) - std::sqrt(2.0 / std::numbers::pi)) < 3.0 * oracle::mc_se(v));
  // Far-from-bound truncation behaves like the untruncated law: Kolmogorov distance.
  std::vector<double> w;
  for (int i = 0; i < 20000; ++i) w.push_back(sample_truncated_normal(10, 1, TruncationSide::Right, 0, rng));
  std::sort(w.begin(), w.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double f = normal_cdf(w[i] - 10.0);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / w.size()), std::abs(f - static_cast<double>(i + 1) / w.size())});
  }
  CHECK(ks < 1.36 / std::sqrt(20000.0) * 1.5);
}

TEST_CASE("scalar helpers") {
  CHECK(normal_quantile(normal_cdf(0.7)) == doctest::Approx(0.7).epsilon(1e-10));
  CHECK(log_normal_pdf(0, 0, 1) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)));
  const std::vector<double> lw{std::log(1.0), std::log(3.0)};
  CHECK(log_sum_exp(lw) == doctest::Approx(std::log(4.0)));
  CHECK(quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  RngStream rng(6, 0);
  std::vector<double> g;
  for (int i = 0; i < 50000; ++i) g.push_back(sample_gamma(3.0, 2.0, rng));
  CHECK(std::abs(oracle::mean(g) - 1.5) < 3.0 * oracle::mc_se(g));
  std::vector<double> bt;
  for (int i = 0; i < 50000; ++i) bt.push_back(sample_beta(2.0, 6.0, rng));
  CHECK(std::abs(oracle::mean(bt) - 0.25) < 3.0 * oracle::mc_se(bt));
  std::vector<double> cat(3, 0.0);
  const std::vector<double> weights{1, 2, 7};
  for (int i = 0; i < 50000; ++i) cat[sample_categorical(weights, rng)] += 1.0;
  CHECK(cat[2] / 50000 == doctest::Approx(0.7).epsilon(0.02));
}
