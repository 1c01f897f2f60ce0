#include "bnpc/causal/rdd.hpp"

#include <cmath>

namespace bnpc {

void RddConfig::validate() const {
  if (!std::isfinite(cutoff)) throw Error(ErrorKind::ConfigError, "cutoff must be finite");
  if (n_draws < 1) throw Error(ErrorKind::ConfigError, "n_draws must be >= 1");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::ConfigError, "credible level must lie in (0, 1)");
  if (min_side < 2 || grid_points < 2 || refine_rounds < 0) throw Error(ErrorKind::ConfigError, "invalid RDD search settings");
}

namespace {

struct SideFit {
  HyperFit hyper;
  double mean = 0.0;
  double var = 0.0;
};

// One side of the cutoff: GP on (x - b) with a linear trend whose
// coefficients carry a flat prior and are integrated out. Hyperparameters
// are chosen by empirical Bayes on the restricted likelihood.
SideFit fit_side(const std::vector<double>& xs, const std::vector<double>& ys, double cutoff, const RddConfig& config) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  MatrixXd x(n, 1);
  VectorXd y(n);
  MatrixXd h(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = xs[static_cast<std::size_t>(i)] - cutoff;
    y(i) = ys[static_cast<std::size_t>(i)];
    h(i, 0) = 1.0;
    h(i, 1) = x(i, 0);
  }
  const VectorXd resid = y - h * h.colPivHouseholderQr().solve(y);
  SideFit s;
  s.hyper = gp_optimize_hypers(x, y, h, HyperBounds::defaults_for(x, resid), config.grid_points, config.refine_rounds);

  const KernelSpec k{s.hyper.rho, s.hyper.sigma_g2};
  MatrixXd c = kernel_matrix(k, x, x);
  c.diagonal().array() += s.hyper.sigma2;
  const Eigen::LLT<MatrixXd> llt(c);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NotPositiveDefinite, "RDD covariance is not positive definite");
  const MatrixXd q = MatrixXd::Zero(1, 1);
  const VectorXd ks = kernel_matrix(k, x, q).col(0);
  const Eigen::Vector2d hs(1.0, 0.0);
  const VectorXd ci_y = llt.solve(y);
  const VectorXd ci_k = llt.solve(ks);
  const MatrixXd ci_h = llt.solve(h);
  const Eigen::Matrix2d a = h.transpose() * ci_h;
  const Eigen::Vector2d beta = a.ldlt().solve(h.transpose() * ci_y);
  const Eigen::Vector2d r = hs - h.transpose() * ci_k;
  s.mean = hs.dot(beta) + ks.dot(llt.solve(y - h * beta));
  s.var = std::max(s.hyper.sigma_g2 - ks.dot(ci_k) + r.dot(a.ldlt().solve(r)), 0.0);
  return s;
}

}  // namespace

RddResult rdd_fit(const VectorXd& running, const VectorXd& a, const VectorXd& y, const RddConfig& config,
                  RngStream& rng) {
  config.validate();
  if (running.size() != y.size() || a.size() != y.size()) {
    throw Error(ErrorKind::DimensionMismatch, "running variable, A and Y lengths differ");
  }
  std::vector<double> x0, y0, x1, y1;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double r = running(i);
    if (!std::isfinite(r)) throw Error(ErrorKind::SharpRddViolation, "row " + std::to_string(i + 1) + ": running variable missing");
    const bool above = r >= config.cutoff;
    if (a(i) != (above ? 1.0 : 0.0)) {
      throw Error(ErrorKind::SharpRddViolation, "row " + std::to_string(i + 1) + ": treatment does not equal 1[running >= cutoff]");
    }
    (above ? x1 : x0).push_back(r);
    (above ? y1 : y0).push_back(y(i));
  }
  if (static_cast<int>(x0.size()) < config.min_side || static_cast<int>(x1.size()) < config.min_side) {
    throw Error(ErrorKind::InsufficientBoundaryData, "need at least " + std::to_string(config.min_side) +
                                                         " units on each side of the cutoff (have " +
                                                         std::to_string(x0.size()) + " below, " +
                                                         std::to_string(x1.size()) + " above)");
  }
  const SideFit below = fit_side(x0, y0, config.cutoff, config);
  const SideFit above = fit_side(x1, y1, config.cutoff, config);
  std::vector<double> psi(static_cast<std::size_t>(config.n_draws));
  for (auto& v : psi) {
    const double g1 = above.mean + std::sqrt(above.var) * rng.normal();
    const double g0 = below.mean + std::sqrt(below.var) * rng.normal();
    v = g1 - g0;
  }
  RddResult r;
  r.effect = summarize("rdd_effect", std::move(psi), {}, config.level);
  r.below = below.hyper;
  r.above = above.hyper;
  r.mean0 = below.mean;
  r.var0 = below.var;
  r.mean1 = above.mean;
  r.var1 = above.var;
  return r;
}

RddResult rdd_fit(const Dataset& data, const RddConfig& config, RngStream& rng) {
  if (!data.running) throw Error(ErrorKind::ConfigError, "no running variable declared");
  data.validate();
  return rdd_fit(data.x.col(*data.running), data.a, data.y, config, rng);
}

}  // namespace bnpc
