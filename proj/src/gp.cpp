#include "bnpc/gp.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "bnpc/kernels.hpp"

namespace bnpc {

void KernelSpec::validate() const {
  if (!(rho > 0.0) || !std::isfinite(rho)) throw Error(ErrorKind::InvalidParameter, "kernel rho must be > 0");
  if (!(sigma_g2 >= 0.0) || !std::isfinite(sigma_g2)) {
    throw Error(ErrorKind::InvalidParameter, "kernel sigma_g2 must be >= 0");
  }
}

double kernel_eval(const KernelSpec& k, std::span<const double> x, std::span<const double> xp) {
  if (x.size() != xp.size()) throw Error(ErrorKind::DimensionMismatch, "kernel_eval: point dimensions differ");
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d2 += (x[i] - xp[i]) * (x[i] - xp[i]);
  return k.sigma_g2 * std::exp(-k.rho * d2);
}

MatrixXd kernel_matrix(const KernelSpec& k, const MatrixXd& a, const MatrixXd& b) {
  if (a.cols() != b.cols()) throw Error(ErrorKind::DimensionMismatch, "kernel_matrix: column mismatch");
  return kernels::sq_exp_cross_omp(a, b, k.rho, k.sigma_g2);
}

SymMatrix gram_matrix(const KernelSpec& k, const MatrixXd& x) {
  return SymMatrix(kernels::sq_exp_gram_omp(x, k.rho, k.sigma_g2));
}

VectorXd GpPrior::mean_at_rows(const MatrixXd& x) const {
  VectorXd m(x.rows());
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) row[static_cast<std::size_t>(c)] = x(i, c);
    m(i) = mean_at(row);
  }
  return m;
}

GpPrior GpPrior::constant_mean(double c, KernelSpec k) {
  return GpPrior{[c](std::span<const double>) { return c; }, k};
}

GpPosterior::GpPosterior(GpPrior prior, MatrixXd x, VectorXd y, double sigma2)
    : prior_(std::move(prior)), x_(std::move(x)), sigma2_(sigma2) {
  prior_.kernel.validate();
  if (x_.rows() != y.size()) throw Error(ErrorKind::DimensionMismatch, "gp_posterior: X and Y lengths differ");
  if (x_.rows() > kMaxGpObservations) {
    throw Error(ErrorKind::ConfigError, "GP fits are limited to 5000 observations");
  }
  if (!(sigma2 >= 0.0)) throw Error(ErrorKind::InvalidParameter, "noise variance must be >= 0");
  if (x_.rows() == 0) return;
  MatrixXd k = kernels::sq_exp_gram_omp(x_, prior_.kernel.rho, prior_.kernel.sigma_g2);
  k.diagonal().array() += sigma2_;
  factor_ = cholesky(k);
  weights_ = factor_.solve(VectorXd(y - prior_.mean_at_rows(x_)));
}

GpPrediction GpPosterior::predict(const MatrixXd& query) const {
  GpPrediction out;
  out.mean = prior_.mean_at_rows(query);
  out.cov = kernels::sq_exp_gram_omp(query, prior_.kernel.rho, prior_.kernel.sigma_g2);
  if (x_.rows() == 0) return out;
  if (query.cols() != x_.cols()) throw Error(ErrorKind::DimensionMismatch, "predict: query dimension mismatch");
  const MatrixXd kqx = kernels::sq_exp_cross_omp(query, x_, prior_.kernel.rho, prior_.kernel.sigma_g2);
  out.mean += kqx * weights_;
  // K(q,q) - V^T V with V = L^{-1} K(X,q).
  const MatrixXd v = factor_.llt.matrixL().solve(kqx.transpose());
  out.cov.noalias() -= v.transpose() * v;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

VectorXd GpPosterior::sample(const MatrixXd& query, RngStream& rng) const {
  GpPrediction p = predict(query);
  return sample_mvn(p.mean, SymMatrix(std::move(p.cov)), rng);
}

GpPosterior gp_posterior(const GpPrior& prior, const MatrixXd& x, const VectorXd& y, double sigma2) {
  return GpPosterior(prior, x, y, sigma2);
}

double gp_marginal_loglik(const GpPrior& prior, const MatrixXd& x, const VectorXd& y, double sigma2) {
  prior.kernel.validate();
  if (x.rows() != y.size()) throw Error(ErrorKind::DimensionMismatch, "marginal loglik: X and Y lengths differ");
  const auto n = static_cast<double>(y.size());
  MatrixXd k = kernels::sq_exp_gram_omp(x, prior.kernel.rho, prior.kernel.sigma_g2);
  k.diagonal().array() += sigma2;
  const CholeskyFactor f = cholesky(k);
  const VectorXd r = y - prior.mean_at_rows(x);
  const VectorXd z = f.llt.matrixL().solve(r);
  return -0.5 * (n * std::log(2.0 * M_PI) + f.log_det() + z.squaredNorm());
}

HyperBounds HyperBounds::defaults_for(const MatrixXd& x, const VectorXd& y) {
  double span2 = 0.0;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double r = x.col(c).maxCoeff() - x.col(c).minCoeff();
    span2 += r * r;
  }
  if (!(span2 > 0.0)) span2 = 1.0;
  double vy = 0.0;
  if (y.size() > 1) vy = (y.array() - y.mean()).square().sum() / static_cast<double>(y.size() - 1);
  if (!(vy > 0.0)) vy = 1.0;
  return HyperBounds{0.1 / span2, 1e2 / span2, 1e-4 * vy, 10.0 * vy, 1e-4 * vy, 2.0 * vy};
}

void HyperBounds::validate() const {
  auto ok = [](double lo, double hi) { return lo > 0.0 && hi >= lo && std::isfinite(hi); };
  if (!ok(rho_lo, rho_hi) || !ok(sigma_g2_lo, sigma_g2_hi) || !ok(sigma2_lo, sigma2_hi)) {
    throw Error(ErrorKind::InvalidParameter, "hyperparameter bounds must be positive, finite, lo <= hi");
  }
}

std::vector<double> log_grid(double lo, double hi, int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  if (n == 1) {
    g[0] = std::sqrt(lo * hi);
    return g;
  }
  const double a = std::log(lo);
  const double b = std::log(hi);
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = std::exp(a + (b - a) * i / (n - 1));
  g.front() = lo;
  g.back() = hi;
  return g;
}

namespace {

// Marginal likelihood for fixed rho in the eigenbasis of the unit-variance
// correlation matrix: every (sigma_g2, sigma2) evaluation is then O(N).
class SpectralObjective {
 public:
  SpectralObjective(const MatrixXd& x, const VectorXd& resid, const MatrixXd& basis, double rho) {
    const MatrixXd c = kernels::sq_exp_gram_omp(x, rho, 1.0);
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(c);
    lambda_ = es.eigenvalues().cwiseMax(0.0);
    u_ = es.eigenvectors().transpose() * resid;
    if (basis.cols() > 0) h_ = es.eigenvectors().transpose() * basis;
  }

  // With a basis, the trend coefficients are integrated out under a flat
  // prior (restricted likelihood).
  double operator()(double sigma_g2, double sigma2) const {
    const auto n = static_cast<double>(lambda_.size());
    const VectorXd inv_d = (sigma_g2 * lambda_.array() + sigma2).inverse().matrix();
    double ld = -inv_d.array().log().sum();
    double q = u_.dot(inv_d.cwiseProduct(u_));
    double nn = n;
    if (h_.cols() > 0) {
      const MatrixXd dh = inv_d.asDiagonal() * h_;
      const MatrixXd a = h_.transpose() * dh;
      const VectorXd b = dh.transpose() * u_;
      const Eigen::LDLT<MatrixXd> ldlt(a);
      q -= b.dot(ldlt.solve(b));
      ld += ldlt.vectorD().array().log().sum();
      nn -= static_cast<double>(h_.cols());
    }
    return -0.5 * (nn * std::log(2.0 * M_PI) + ld + q);
  }

 private:
  VectorXd lambda_;
  VectorXd u_;
  MatrixXd h_;
};

}  // namespace

HyperFit gp_optimize_hypers(const MatrixXd& x, const VectorXd& y, const HyperBounds& bounds,
                            int grid_points, int refine_rounds) {
  return gp_optimize_hypers(x, y, MatrixXd(x.rows(), 0), bounds, grid_points, refine_rounds);
}

HyperFit gp_optimize_hypers(const MatrixXd& x, const VectorXd& y, const MatrixXd& basis, const HyperBounds& bounds,
                            int grid_points, int refine_rounds) {
  if (x.rows() == 0 || x.rows() != y.size()) {
    throw Error(ErrorKind::InvalidParameter, "gp_optimize_hypers needs nonempty, matching X and Y");
  }
  if (x.rows() > kMaxGpObservations) throw Error(ErrorKind::ConfigError, "GP fits are limited to 5000 observations");
  if (grid_points < 2 || refine_rounds < 0) throw Error(ErrorKind::ConfigError, "invalid grid settings");
  bounds.validate();

  if (basis.rows() != x.rows()) throw Error(ErrorKind::DimensionMismatch, "basis rows differ from X rows");
  HyperFit fit;
  fit.mean = basis.cols() > 0 ? 0.0 : y.mean();
  const VectorXd resid = y.array() - fit.mean;
  if (resid.cwiseAbs().maxCoeff() == 0.0) {
    fit.degenerate = true;
    fit.rho = bounds.rho_lo;
    fit.sigma_g2 = 0.0;
    fit.sigma2 = bounds.sigma2_lo;
    fit.log_lik = SpectralObjective(x, resid, basis, fit.rho)(0.0, fit.sigma2);
    return fit;
  }

  std::map<double, SpectralObjective> cache;
  auto objective_for = [&](double rho) -> const SpectralObjective& {
    auto it = cache.find(rho);
    if (it == cache.end()) it = cache.emplace(rho, SpectralObjective(x, resid, basis, rho)).first;
    return it->second;
  };

  const auto rhos = log_grid(bounds.rho_lo, bounds.rho_hi, grid_points);
  const auto sgs = log_grid(bounds.sigma_g2_lo, bounds.sigma_g2_hi, grid_points);
  const auto s2s = log_grid(bounds.sigma2_lo, bounds.sigma2_hi, grid_points);

  double best = -std::numeric_limits<double>::infinity();
  for (double rho : rhos) {
    const SpectralObjective& obj = objective_for(rho);
    for (double sg : sgs) {
      for (double s2 : s2s) {
        const double v = obj(sg, s2);
        if (v > best) {
          best = v;
          fit.rho = rho;
          fit.sigma_g2 = sg;
          fit.sigma2 = s2;
        }
      }
    }
  }

  // Coordinate refinement: 9 log-spaced points within one current step of the
  // incumbent, shrinking the step by 4 each round. Only improvements move.
  const double step_rho = std::log(bounds.rho_hi / bounds.rho_lo) / (grid_points - 1);
  const double step_sg = std::log(bounds.sigma_g2_hi / bounds.sigma_g2_lo) / (grid_points - 1);
  const double step_s2 = std::log(bounds.sigma2_hi / bounds.sigma2_lo) / (grid_points - 1);
  auto local = [](double cur, double half_width, double lo, double hi) {
    std::vector<double> pts;
    for (int i = -4; i <= 4; ++i) {
      if (i == 0) continue;
      const double v = cur * std::exp(half_width * i / 4.0);
      if (v >= lo && v <= hi) pts.push_back(v);
    }
    return pts;
  };
  for (int round = 0; round < refine_rounds; ++round) {
    const double shrink = std::pow(4.0, -round);
    for (double rho : local(fit.rho, step_rho * shrink, bounds.rho_lo, bounds.rho_hi)) {
      const double v = objective_for(rho)(fit.sigma_g2, fit.sigma2);
      if (v > best) {
        best = v;
        fit.rho = rho;
      }
    }
    const SpectralObjective& obj = objective_for(fit.rho);
    for (double sg : local(fit.sigma_g2, step_sg * shrink, bounds.sigma_g2_lo, bounds.sigma_g2_hi)) {
      const double v = obj(sg, fit.sigma2);
      if (v > best) {
        best = v;
        fit.sigma_g2 = sg;
      }
    }
    for (double s2 : local(fit.sigma2, step_s2 * shrink, bounds.sigma2_lo, bounds.sigma2_hi)) {
      const double v = obj(fit.sigma_g2, s2);
      if (v > best) {
        best = v;
        fit.sigma2 = s2;
      }
    }
  }
  fit.log_lik = best;
  return fit;
}

}  // namespace bnpc
