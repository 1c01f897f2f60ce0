#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bnpc/gp.hpp"
#include "bnpc/kernels.hpp"
#include "oracles.hpp"

using namespace bnpc;

namespace {

MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, RngStream& rng) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform() * 2.0 - 1.0;
  return m;
}

}  // namespace

TEST_CASE("kernel values") {
  const std::vector<double> x{0.3, -1.0};
  CHECK(kernel_eval({4.0, 0.2}, x, x) == 0.2);
  const std::vector<double> a{0.0}, b{1.0};
  CHECK(kernel_eval({1.0, 1.0}, a, b) == doctest::Approx(std::exp(-1.0)));
  RngStream rng(1, 0);
  const MatrixXd pts = random_matrix(15, 2, rng);
  const MatrixXd g = gram_matrix({2.0, 1.5}, pts).matrix();
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(g);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
  CHECK(g.maxCoeff() <= 1.5);
}

TEST_CASE("posterior with no data is the prior") {
  RngStream rng(2, 0);
  const MatrixXd q = random_matrix(4, 2, rng);
  const GpPrior prior = GpPrior::constant_mean(0.7, {3.0, 0.5});
  const GpPosterior post(prior, MatrixXd(0, 2), VectorXd(0), 0.1);
  const GpPrediction p = post.predict(q);
  CHECK((p.mean.array() - 0.7).abs().maxCoeff() == 0.0);
  CHECK((p.cov - oracle::cross(q, q, 3.0, 0.5)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("huge noise leaves the prior unchanged") {
  RngStream rng(3, 0);
  const MatrixXd x = random_matrix(6, 1, rng);
  const VectorXd y = random_matrix(6, 1, rng);
  const MatrixXd q = random_matrix(3, 1, rng);
  const GpPrediction p = gp_posterior(GpPrior::constant_mean(0.0, {1.0, 1.0}), x, y, 1e12).predict(q);
  CHECK(p.mean.cwiseAbs().maxCoeff() < 1e-4);
  CHECK((p.cov - oracle::cross(q, q, 1.0, 1.0)).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("posterior matches partitioned-Gaussian conditioning") {
  RngStream rng(4, 0);
  for (int rep = 0; rep < 20; ++rep) {
    const MatrixXd x = random_matrix(3, 2, rng);
    const VectorXd y = random_matrix(3, 1, rng);
    const MatrixXd q = random_matrix(5, 2, rng);
    const double rho = 0.5 + rng.uniform() * 3.0;
    const double s2g = 0.2 + rng.uniform();
    const double s2 = 0.05 + rng.uniform() * 0.5;
    const GpPrediction p = gp_posterior(GpPrior::constant_mean(0.3, {rho, s2g}), x, y, s2).predict(q);
    const auto o = oracle::condition_joint(0.3, rho, s2g, x, y, s2, q);
    CHECK((p.mean - o.mean).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((p.cov - o.cov).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((p.cov.diagonal().array() <= s2g + 1e-12).all());
  }
}

TEST_CASE("marginal likelihood") {
  const GpPrior zero = GpPrior::constant_mean(0.0, {1.0, 0.0});
  const MatrixXd x = MatrixXd::Zero(1, 1);
  CHECK(gp_marginal_loglik(zero, x, VectorXd::Zero(1), 1.0) == doctest::Approx(-0.5 * std::log(2 * std::numbers::pi)));
  RngStream rng(5, 0);
  for (int rep = 0; rep < 10; ++rep) {
    const MatrixXd xs = random_matrix(12, 3, rng);
    const VectorXd y = random_matrix(12, 1, rng);
    const double ll = gp_marginal_loglik(GpPrior::constant_mean(0.1, {1.3, 0.8}), xs, y, 0.3);
    MatrixXd cov = oracle::cross(xs, xs, 1.3, 0.8) + 0.3 * MatrixXd::Identity(12, 12);
    const double ref = oracle::dense_log_normal(y, VectorXd::Constant(12, 0.1), cov);
    CHECK(std::abs(ll - ref) <= 1e-8 * std::abs(ref));
  }
}

TEST_CASE("matched model scores at least as well as a mismatched one") {
  RngStream rng(6, 0);
  const MatrixXd x = random_matrix(30, 1, rng);
  const GpPrior truth = GpPrior::constant_mean(0.0, {2.0, 1.0});
  const VectorXd y = gp_posterior(truth, MatrixXd(0, 1), VectorXd(0), 0.1).sample(x, rng) +
                     0.3 * VectorXd::NullaryExpr(30, [&] { return rng.normal(); });
  MatrixXd xd(31, 1);
  xd << x, x.row(0);
  VectorXd yd(31);
  yd << y, y(0);
  const GpPrior wrong = GpPrior::constant_mean(3.0, {200.0, 0.01});
  CHECK(gp_marginal_loglik(wrong, xd, yd, 0.1) / 31 <= gp_marginal_loglik(truth, xd, yd, 0.1) / 31);
}

TEST_CASE("prediction limits") {
  RngStream rng(7, 0);
  const MatrixXd x = random_matrix(8, 1, rng);
  const VectorXd y = random_matrix(8, 1, rng);
  const auto post = gp_posterior(GpPrior::constant_mean(0.0, {4.0, 1.0}), x, y, 1e-10);
  const GpPrediction at = post.predict(x.topRows(3));
  CHECK((at.mean - y.head(3)).cwiseAbs().maxCoeff() < 1e-4);
  MatrixXd far(1, 1);
  far << 10.0;
  CHECK(post.predict(far).cov(0, 0) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("empirical Bayes hyperparameters") {
  RngStream rng(8, 0);
  const MatrixXd x = random_matrix(60, 1, rng);
  const VectorXd g = gp_posterior(GpPrior::constant_mean(0.0, {10.0, 1.0}), MatrixXd(0, 1), VectorXd(0), 0.1).sample(x, rng);
  VectorXd y = g;
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) += std::sqrt(0.1) * rng.normal();
  const HyperBounds b = HyperBounds::defaults_for(x, y);
  const HyperFit fit = gp_optimize_hypers(x, y, b, 10, 0);

  // Exhaustive grid maximizer over the same grid.
  const auto rg = log_grid(b.rho_lo, b.rho_hi, 10);
  const auto sg = log_grid(b.sigma_g2_lo, b.sigma_g2_hi, 10);
  const auto ng = log_grid(b.sigma2_lo, b.sigma2_hi, 10);
  const double ybar = y.mean();
  double best = -1e300;
  double br = 0, bs = 0, bn = 0;
  for (double r : rg) {
    for (double s : sg) {
      for (double n : ng) {
        const MatrixXd cov = oracle::cross(x, x, r, s) + n * MatrixXd::Identity(60, 60);
        const double ll = oracle::dense_log_normal(y, VectorXd::Constant(60, ybar), cov);
        if (ll > best) {
          best = ll;
          br = r;
          bs = s;
          bn = n;
        }
      }
    }
  }
  CHECK(fit.rho == doctest::Approx(br));
  CHECK(fit.sigma_g2 == doctest::Approx(bs));
  CHECK(fit.sigma2 == doctest::Approx(bn));

  // Refinement never lowers the likelihood, and row order does not matter.
  const HyperFit refined = gp_optimize_hypers(x, y, b);
  CHECK(refined.log_lik >= fit.log_lik - 1e-9);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(60);
  perm.setIdentity();
  std::reverse(perm.indices().data(), perm.indices().data() + 60);
  const HyperFit permuted = gp_optimize_hypers(perm * x, perm * y, b);
  CHECK(permuted.rho == doctest::Approx(refined.rho));
  CHECK(permuted.sigma_g2 == doctest::Approx(refined.sigma_g2));
}

TEST_CASE("pure noise selects the smallest signal variance") {
  int hits = 0;
  for (int s = 0; s < 20; ++s) {
    RngStream rng(100 + s, 0);
    const MatrixXd x = random_matrix(40, 1, rng);
    VectorXd y(40);
    for (Eigen::Index i = 0; i < 40; ++i) y(i) = rng.normal();
    const HyperBounds b = HyperBounds::defaults_for(x, y);
    const HyperFit f = gp_optimize_hypers(x, y, b, 8, 0);
    hits += f.sigma_g2 == doctest::Approx(b.sigma_g2_lo) ? 1 : 0;
  }
  CHECK(hits >= 18);
}

TEST_CASE("serial and OpenMP kernels agree exactly") {
  RngStream rng(9, 0);
  const MatrixXd x = random_matrix(50, 3, rng);
  const MatrixXd y = random_matrix(20, 3, rng);
  CHECK(kernels::sq_exp_gram_serial(x, 0.7, 1.1) == kernels::sq_exp_gram_omp(x, 0.7, 1.1));
  CHECK(kernels::sq_exp_cross_serial(x, y, 0.7, 1.1) == kernels::sq_exp_cross_omp(x, y, 0.7, 1.1));
  CHECK((kernels::sq_exp_cross_serial(x, y, 0.7, 1.1) - oracle::cross(x, y, 0.7, 1.1)).cwiseAbs().maxCoeff() < 1e-14);
}
