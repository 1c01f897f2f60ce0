#include <doctest.h>

#include <cmath>

#include "bnpc/sparse_linear.hpp"
#include "oracles.hpp"

using namespace bnpc;

namespace {

MatrixXd normal_matrix(Eigen::Index r, Eigen::Index c, RngStream& rng) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

std::vector<VectorXd> columns_of(const MatrixXd& x, int mask) {
  std::vector<VectorXd> cols;
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    if ((mask >> j) & 1) cols.push_back(x.col(j));
  }
  return cols;
}

}  // namespace

TEST_CASE("linked prior odds") {
  CHECK(linked_prior_odds(true, 1.0) == doctest::Approx(0.5));
  CHECK(linked_prior_odds(false, 1.0) == doctest::Approx(0.5));
  CHECK(linked_prior_odds(false, 20.0) == doctest::Approx(0.5));
  CHECK(linked_prior_odds(true, 9.0) == doctest::Approx(0.9));
  CHECK_THROWS_AS(linked_prior_odds(true, 0.5), Error);
}

TEST_CASE("spike and slab limits") {
  RngStream rng(1, 0);
  const MatrixXd x = normal_matrix(60, 3, rng);
  VectorXd y = x.col(0) * 1.5 + VectorXd::NullaryExpr(60, [&] { return rng.normal(); });
  SpikeSlabConfig c;
  c.burn_in = 200;
  c.n_draws = 2000;
  c.fixed_tau = 0.0;
  for (const auto& d : spike_slab_gibbs(x, y, c, rng).draws) {
    CHECK(d.beta.cwiseAbs().maxCoeff() == 0.0);
    for (char g : d.gamma) CHECK(g == 0);
  }

  // tau = 1 with fixed variances is conjugate ridge regression.
  c.fixed_tau = 1.0;
  c.fixed_slab_var = 2.0;
  c.fixed_noise_var = 1.0;
  const auto fit = spike_slab_gibbs(x, y, c, rng);
  MatrixXd d(60, 4);
  d << VectorXd::Ones(60), x;
  VectorXd prior_prec(4);
  prior_prec << 1.0 / c.intercept_var, 0.5, 0.5, 0.5;
  const MatrixXd prec = d.transpose() * d + MatrixXd(prior_prec.asDiagonal());
  const VectorXd ridge = prec.fullPivLu().solve(d.transpose() * y);
  for (int j = 0; j < 3; ++j) {
    std::vector<double> b;
    for (const auto& s : fit.draws) b.push_back(s.beta(j));
    // Draws are autocorrelated; allow for an effective sample size of a quarter.
    CHECK(std::abs(oracle::mean(b) - ridge(j + 1)) < 3.0 * 2.0 * oracle::mc_se(b));
  }
  for (const auto& s : fit.draws) {
    for (std::size_t j = 0; j < s.gamma.size(); ++j) {
      if (!s.gamma[j]) CHECK(s.beta(static_cast<Eigen::Index>(j)) == 0.0);
    }
    CHECK(s.tau >= 0.0);
    CHECK(s.tau <= 1.0);
  }
}

TEST_CASE("joint spike and slab matches 2^4 enumeration") {
  RngStream rng(2, 0);
  const int n = 60, p = 4;
  const MatrixXd x = normal_matrix(n, p, rng);
  VectorXd a(n), y(n);
  for (int i = 0; i < n; ++i) {
    a(i) = 0.6 * x(i, 0) + 0.3 * x(i, 1) + rng.normal();
    y(i) = 0.5 * a(i) + 0.4 * x(i, 0) + 0.2 * x(i, 2) + rng.normal();
  }
  SharedSpikeSlabConfig c;
  c.base.burn_in = 500;
  c.base.n_draws = 8000;
  c.base.fixed_slab_var = 1.0;
  c.base.fixed_noise_var = 1.0;
  c.fixed_treatment_slab_var = 1.0;
  c.fixed_treatment_noise_var = 1.0;
  c.links.treatment = Link::Identity;
  c.propensity_term = false;
  const auto fit = shared_spike_slab_gibbs(x, a, y, c, rng);
  const VectorXd gibbs = fit.inclusion_prob();

  const VectorXd ones = VectorXd::Ones(n);
  const auto exact = oracle::enumerate_inclusion(p, 1.0, 1.0, [&](int mask) {
    auto cy = columns_of(x, mask);
    std::vector<double> vy(cy.size(), 1.0);
    cy.push_back(ones);
    vy.push_back(c.base.intercept_var);
    cy.push_back(a);
    vy.push_back(c.base.intercept_var);
    auto ca = columns_of(x, mask);
    std::vector<double> va(ca.size(), 1.0);
    ca.push_back(ones);
    va.push_back(c.base.intercept_var);
    return oracle::dense_log_normal(y, VectorXd::Zero(n), oracle::linear_marginal_cov(cy, vy, 1.0)) +
           oracle::dense_log_normal(a, VectorXd::Zero(n), oracle::linear_marginal_cov(ca, va, 1.0));
  });
  for (int j = 0; j < p; ++j) CHECK(std::abs(gibbs(j) - exact[static_cast<std::size_t>(j)]) < 0.05);
  for (const auto& s : fit.draws) {
    for (int j = 0; j < p; ++j) {
      if (!s.gamma[static_cast<std::size_t>(j)]) {
        CHECK(s.beta(j) == 0.0);
        CHECK(s.alpha(j) == 0.0);
      }
    }
  }
}

TEST_CASE("joint spike and slab keeps confounders") {
  int good = 0;
  for (int seed = 0; seed < 20; ++seed) {
    RngStream rng(100 + seed, 0);
    const int n = 300;
    const MatrixXd x = normal_matrix(n, 3, rng);
    VectorXd a(n), y(n);
    for (int i = 0; i < n; ++i) {
      a(i) = rng.uniform() < normal_cdf(0.8 * x(i, 0) + 0.8 * x(i, 1)) ? 1.0 : 0.0;
      y(i) = a(i) + x(i, 0) + rng.normal();
    }
    SharedSpikeSlabConfig c;
    c.base.burn_in = 200;
    c.base.n_draws = 400;
    const VectorXd incl = shared_spike_slab_gibbs(x, a, y, c, rng).inclusion_prob();
    good += (incl(0) > 0.9 && incl(2) < 0.5) ? 1 : 0;
  }
  CHECK(good >= 16);
}

TEST_CASE("horseshoe") {
  RngStream rng(3, 0);
  // Heavier tails than a normal with the same interquartile range.
  std::vector<double> draws;
  for (int i = 0; i < 200000; ++i) draws.push_back(horseshoe_prior_draw(1.0, rng));
  const double iqr = quantile(draws, 0.75) - quantile(draws, 0.25);
  double tail = 0.0;
  for (double v : draws) tail += std::abs(v) > 10.0 * iqr ? 1.0 : 0.0;
  tail /= static_cast<double>(draws.size());
  const double normal_sd = iqr / (2.0 * normal_quantile(0.75));
  const double normal_tail = 2.0 * (1.0 - normal_cdf(10.0 * iqr / normal_sd));
  CHECK(tail > normal_tail);

  const int n = 200, p = 50;
  const MatrixXd x = normal_matrix(n, p, rng);
  VectorXd y(n);
  for (int i = 0; i < n; ++i) y(i) = 3.0 * x(i, 0) + 3.0 * x(i, 1) + rng.normal();
  HorseshoeConfig c;
  c.burn_in = 500;
  c.n_draws = 1000;
  const HorseshoeFit fit = horseshoe_gibbs(x, y, c, rng);
  const VectorXd m = fit.beta_mean();
  CHECK(m.tail(p - 2).cwiseAbs().mean() < 0.1);
  for (int j = 0; j < 2; ++j) {
    std::vector<double> b;
    for (const auto& s : fit.draws) b.push_back(s.beta(j));
    CHECK(std::abs(oracle::mean(b) - 3.0) < 3.0 * oracle::sd(b));
  }
  const HorseshoeFit zero = horseshoe_gibbs(x, VectorXd::Zero(n), c, rng);
  for (int j = 0; j < p; ++j) {
    std::vector<double> b;
    for (const auto& s : zero.draws) b.push_back(s.beta(j));
    CHECK(std::abs(oracle::mean(b)) < 3.0 * std::max(oracle::mc_se(b), 1e-12) + 1e-9);
  }
}

TEST_CASE("Hahn reparameterization beats outcome-only selection under confounding") {
  int better = 0;
  for (int seed = 0; seed < 20; ++seed) {
    RngStream rng(200 + seed, 0);
    const int n = 80, p = 100;
    const MatrixXd x = normal_matrix(n, p, rng);
    VectorXd a(n), y(n);
    const double tau = 1.0;
    for (int i = 0; i < n; ++i) {
      a(i) = 1.5 * x(i, 0) + 1.5 * x(i, 1) + 0.5 * rng.normal();
      y(i) = tau * a(i) + 0.5 * x(i, 0) + 0.5 * x(i, 1) + 1.0 * x(i, 2) + 0.5 * rng.normal();
    }
    HorseshoeConfig hc;
    hc.burn_in = 300;
    hc.n_draws = 500;
    const double hahn = hahn_reparam_fit(x, a, y, hc, rng).beta_a_mean();
    MatrixXd xa(n, p + 1);
    xa << a, x;
    SpikeSlabConfig sc;
    sc.burn_in = 300;
    sc.n_draws = 500;
    const auto naive = spike_slab_gibbs(xa, y, sc, rng);
    const double naive_a = naive.beta_mean()(0);
    better += std::abs(hahn - tau) < std::abs(naive_a - tau) ? 1 : 0;
  }
  CHECK(better >= 14);
}

TEST_CASE("Hahn reparameterization without confounding") {
  RngStream rng(4, 0);
  const int n = 150, p = 5;
  const MatrixXd x = normal_matrix(n, p, rng);
  VectorXd a(n), y(n);
  for (int i = 0; i < n; ++i) {
    a(i) = rng.normal();
    y(i) = 0.8 * a(i) + x(i, 0) + 0.5 * rng.normal();
  }
  HorseshoeConfig hc;
  hc.burn_in = 500;
  hc.n_draws = 3000;
  const HahnReparamFit h = hahn_reparam_fit(x, a, y, hc, rng);
  MatrixXd xa(n, p + 1);
  xa << a, x;
  HorseshoeConfig forced = hc;
  forced.n_forced = 1;
  const HorseshoeFit plain = horseshoe_gibbs(xa, y, forced, rng);
  std::vector<double> hb, pb;
  for (const auto& s : h.draws) hb.push_back(s.beta_a);
  for (const auto& s : plain.draws) pb.push_back(s.forced(0));
  const double se = std::sqrt(std::pow(oracle::mc_se(hb), 2) + std::pow(oracle::mc_se(pb), 2));
  // Autocorrelated chains: inflate the naive standard error.
  CHECK(std::abs(oracle::mean(hb) - oracle::mean(pb)) < 3.0 * 3.0 * se);

  // Rescaling the covariates by 2 leaves beta_a unchanged up to MC error.
  RngStream r1(5, 0), r2(5, 0);
  const double base = hahn_reparam_fit(x, a, y, hc, r1).beta_a_mean();
  const double scaled = hahn_reparam_fit(2.0 * x, a, y, hc, r2).beta_a_mean();
  CHECK(std::abs(base - scaled) < 3.0 * 3.0 * oracle::mc_se(hb) * std::sqrt(2.0));
}
