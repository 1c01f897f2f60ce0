#include <doctest.h>

#include <cmath>
#include <numbers>

#include "bnpc/covariate_models.hpp"
#include "oracles.hpp"

using namespace bnpc;

TEST_CASE("Bayesian bootstrap atoms and counts") {
  MatrixXd distinct(4, 1);
  distinct << 1, 2, 3, 4;
  const auto p4 = bb_posterior(distinct);
  CHECK(p4.atoms.rows() == 4);
  CHECK(p4.counts == std::vector<double>{1, 1, 1, 1});
  MatrixXd dup(4, 2);
  dup << 1, 0, 1, 0, 2, 0, 3, 1;
  const auto p = bb_posterior(dup);
  CHECK(p.counts == std::vector<double>{2, 1, 1});
  CHECK(p.atom_of_row == std::vector<int>{0, 0, 1, 2});
  MatrixXd one(3, 1);
  one << 5, 5, 5;
  RngStream rng(1, 0);
  CHECK(bb_sample_weights(bb_posterior(one), rng) == std::vector<double>{1.0});

  std::vector<std::vector<double>> w(3);
  for (int i = 0; i < 100000; ++i) {
    const auto s = bb_sample_weights(p, rng);
    for (std::size_t j = 0; j < 3; ++j) w[j].push_back(s[j]);
  }
  const double n = 4.0;
  for (std::size_t j = 0; j < 3; ++j) {
    const double m = p.counts[j];
    CHECK(std::abs(oracle::mean(w[j]) - m / n) < 3.0 * oracle::mc_se(w[j]));
    // Variance of the squared deviation, for the MC-SE of the variance estimate.
    std::vector<double> sq;
    for (double v : w[j]) sq.push_back((v - m / n) * (v - m / n));
    CHECK(std::abs(oracle::mean(sq) - m * (n - m) / (n * n * (n + 1))) < 3.0 * oracle::mc_se(sq));
  }
}

TEST_CASE("stick breaking") {
  const std::vector<double> first{1.0, 0.3, 1.0};
  CHECK(stick_break(first) == std::vector<double>{1.0, 0.0, 0.0});
  const std::vector<double> half{0.5, 0.5, 1.0};
  const auto w = stick_break(half);
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(0.25));
  CHECK(w[2] == doctest::Approx(0.25));

  RngStream rng(2, 0);
  std::vector<double> w1, w2;
  for (int i = 0; i < 100000; ++i) {
    std::vector<double> raw(20);
    for (auto& r : raw) r = sample_beta(1.0, 1.0, rng);
    raw.back() = 1.0;
    const auto s = stick_break(raw);
    double total = 0.0;
    for (double v : s) total += v;
    if (i < 100) CHECK(std::abs(total - 1.0) < 1e-12);
    w1.push_back(s[0]);
    w2.push_back(s[1]);
  }
  CHECK(std::abs(oracle::mean(w1) - 0.5) < 3.0 * oracle::mc_se(w1));
  CHECK(std::abs(oracle::mean(w2) - 0.25) < 3.0 * oracle::mc_se(w2));
}

TEST_CASE("cluster counts") {
  CHECK(expected_cluster_count(1.0, 1) == doctest::Approx(2.0));
  CHECK(exact_expected_cluster_count(1.0, 1) == doctest::Approx(1.0));
  double h100 = 0.0;
  for (int i = 1; i <= 100; ++i) h100 += 1.0 / i;
  CHECK(expected_cluster_count(1.0, 100) == doctest::Approx(1.0 + h100));
  CHECK(exact_expected_cluster_count(1.0, 100) == doctest::Approx(h100));
  RngStream rng(3, 0);
  const auto counts = simulate_cluster_counts(1.0, 100, 200, 4000, rng);
  std::vector<double> c(counts.begin(), counts.end());
  CHECK(std::abs(oracle::mean(c) - h100) < 3.0 * oracle::mc_se(c));
}

TEST_CASE("mixture conditional density") {
  StickBreakingMixture m;
  m.weights = {0.5, 0.5};
  m.sticks = {0.5, 1.0};
  m.kinds = {ColumnKind::Continuous, ColumnKind::Continuous};
  m.loc.resize(2, 2);
  m.loc << 5, 1, -5, -1;
  m.scale2 = MatrixXd::Ones(2, 2);
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> xo{5.0, nan};
  const auto post = m.class_posterior(xo);
  CHECK(post[0] > 0.999);
  CHECK(post[0] + post[1] == doctest::Approx(1.0));
  const std::vector<double> xm{0.3};
  const double expect = post[0] * std::exp(log_normal_pdf(0.3, 1, 1)) + post[1] * std::exp(log_normal_pdf(0.3, -1, 1));
  CHECK(imm_conditional_density(m, xo, xm) == doctest::Approx(expect));

  StickBreakingMixture single = m;
  single.weights = {1.0};
  single.sticks = {1.0};
  single.loc = m.loc.topRows(1);
  single.scale2 = m.scale2.topRows(1);
  CHECK(imm_conditional_density(single, xo, xm) == doctest::Approx(std::exp(log_normal_pdf(0.3, 1, 1))));

  // Relabelling components leaves the likelihood unchanged.
  StickBreakingMixture swapped = m;
  swapped.loc.row(0) = m.loc.row(1);
  swapped.loc.row(1) = m.loc.row(0);
  MatrixXd x(3, 2);
  x << 4, 1, -5, 0, 0.5, 0.2;
  CHECK(imm_log_likelihood(swapped, x) == doctest::Approx(imm_log_likelihood(m, x)));
}

TEST_CASE("IMM density recovery and single-cluster parsimony") {
  RngStream rng(4, 0);
  MatrixXd x(400, 1);
  for (int i = 0; i < 400; ++i) x(i, 0) = (i % 2 ? 5.0 : -5.0) + rng.normal();
  ImmConfig c;
  c.truncation = 20;
  c.burn_in = 200;
  c.n_draws = 200;
  const ImmFit fit = imm_fit(x, c, rng);
  double l1 = 0.0;
  const double h = 0.05;
  for (double t = -10.0; t <= 10.0; t += h) {
    const std::vector<double> pt{t};
    double f = 0.0;
    for (const auto& d : fit.draws) f += std::exp(d.log_density(pt));
    f /= static_cast<double>(fit.draws.size());
    const double truth = 0.5 * std::exp(log_normal_pdf(t, 5, 1)) + 0.5 * std::exp(log_normal_pdf(t, -5, 1));
    l1 += std::abs(f - truth) * h;
  }
  CHECK(l1 < 0.15);

  MatrixXd y(1000, 1);
  for (int i = 0; i < 1000; ++i) y(i, 0) = rng.normal();
  const ImmFit one = imm_fit(y, c, rng);
  int ok = 0;
  for (std::size_t b = 0; b < one.draws.size(); ++b) {
    std::vector<int> sizes(static_cast<std::size_t>(c.truncation), 0);
    for (int l : one.labels[b]) ++sizes[static_cast<std::size_t>(l)];
    int big = 0;
    for (int s : sizes) big += s > 0.05 * 1000 ? 1 : 0;
    ok += big == 1 ? 1 : 0;
  }
  CHECK(ok >= 0.9 * static_cast<double>(one.draws.size()));
}

TEST_CASE("imputation with missing entries") {
  RngStream rng(5, 0);
  MatrixXd x(200, 2);
  for (int i = 0; i < 200; ++i) {
    const double z = i % 2 ? 3.0 : -3.0;
    x(i, 0) = z + 0.3 * rng.normal();
    x(i, 1) = z + 0.3 * rng.normal();
  }
  x(0, 1) = std::numeric_limits<double>::quiet_NaN();  // row 0 has x1 near -3
  ImmConfig c;
  c.truncation = 10;
  c.burn_in = 100;
  c.n_draws = 100;
  const ImmFit fit = imm_fit(x, c, rng);
  std::vector<double> imp;
  for (const auto& m : fit.imputed) imp.push_back(m(0, 1));
  CHECK(oracle::mean(imp) < -2.0);
  for (const auto& m : fit.imputed) CHECK(!std::isnan(m(0, 1)));
}

TEST_CASE("imputation MH step") {
  StickBreakingMixture m;
  m.weights = {0.3, 0.7};
  m.sticks = {0.3, 1.0};
  m.kinds = {ColumnKind::Binary, ColumnKind::Binary};
  m.loc.resize(2, 2);
  m.loc << 0.9, 0.2, 0.1, 0.6;
  m.scale2 = MatrixXd::Ones(2, 2);
  const std::vector<double> current{1.0, 0.0};
  const std::vector<char> missing{0, 1};

  // Flat callback: imputations follow the mixture conditional exactly.
  RngStream rng(6, 0);
  const int n = 20000;
  double ones = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto v = imm_impute_mh(m, current, missing, [](std::span<const double>) { return 1.0; }, rng);
    ones += v[1];
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> xo{1.0, nan};
  const auto post = m.class_posterior(xo);
  const double p1 = post[0] * 0.2 + post[1] * 0.6;
  const double stat = (ones - n * p1) * (ones - n * p1) / (n * p1) +
                      (n - ones - n * (1 - p1)) * (n - ones - n * (1 - p1)) / (n * (1 - p1));
  CHECK(oracle::chi2_sf(stat, 1.0) > 0.01);

  // Zero likelihood for anything but the current record: never moves.
  for (int i = 0; i < 200; ++i) {
    const auto v = imm_impute_mh(
        m, current, missing, [&](std::span<const double> x) { return x[1] == current[1] ? 1.0 : 0.0; }, rng);
    CHECK(v[1] == current[1]);
  }
  // Ratio above one always accepts: the proposal is returned.
  RngStream r1(7, 0), r2(7, 0);
  for (int i = 0; i < 200; ++i) {
    const auto v = imm_impute_mh(
        m, current, missing, [&](std::span<const double> x) { return x[1] == current[1] ? 1.0 : 2.0; }, r1);
    const auto flat = imm_impute_mh(m, current, missing, [](std::span<const double>) { return 1.0; }, r2);
    CHECK(v[1] == flat[1]);
  }
}

TEST_CASE("covariate laws") {
  MatrixXd atoms(3, 1);
  atoms << 1, 2, 3;
  FixedDiscreteLaw law(atoms, {0.2, 0.3, 0.5});
  RngStream rng(8, 0);
  auto s = law.for_draw(0, rng);
  std::vector<double> draws;
  for (int i = 0; i < 50000; ++i) draws.push_back(s->draw(rng)[0]);
  CHECK(std::abs(oracle::mean(draws) - 2.3) < 3.0 * oracle::mc_se(draws));
}
