#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "bnpc/numerics.hpp"

namespace bnpc {

/// Squared-exponential kernel K(x, x') = sigma_g2 * exp(-rho * |x - x'|^2).
struct KernelSpec {
  double rho = 1.0;       // inverse squared length-scale
  double sigma_g2 = 1.0;  // signal variance

  void validate() const;
};

double kernel_eval(const KernelSpec& k, std::span<const double> x, std::span<const double> xp);

/// Cross-covariance matrix between the rows of `a` and `b`.
MatrixXd kernel_matrix(const KernelSpec& k, const MatrixXd& a, const MatrixXd& b);
SymMatrix gram_matrix(const KernelSpec& k, const MatrixXd& x);

using MeanFunction = std::function<double(std::span<const double>)>;

struct GpPrior {
  MeanFunction mean_fn;  // empty means m(x) = 0
  KernelSpec kernel;

  double mean_at(std::span<const double> x) const { return mean_fn ? mean_fn(x) : 0.0; }
  VectorXd mean_at_rows(const MatrixXd& x) const;

  static GpPrior constant_mean(double c, KernelSpec k);
};

struct GpPrediction {
  VectorXd mean;
  MatrixXd cov;
};

constexpr Eigen::Index kMaxGpObservations = 5000;

/// Exact conjugate posterior of g under Y = g(X) + Normal(0, sigma2) noise.
/// Immutable once built; queries may run concurrently.
class GpPosterior {
 public:
  GpPosterior(GpPrior prior, MatrixXd x, VectorXd y, double sigma2);

  const GpPrior& prior() const { return prior_; }
  double noise_variance() const { return sigma2_; }
  Eigen::Index n_train() const { return x_.rows(); }

  GpPrediction predict(const MatrixXd& query) const;
  /// Joint draw of g over the query rows.
  VectorXd sample(const MatrixXd& query, RngStream& rng) const;

 private:
  GpPrior prior_;
  MatrixXd x_;
  double sigma2_;
  CholeskyFactor factor_;
  VectorXd weights_;  // (K + sigma2 I)^{-1} (Y - m(X))
};

GpPosterior gp_posterior(const GpPrior& prior, const MatrixXd& x, const VectorXd& y, double sigma2);

/// log Normal(Y | m(X), K(X, X) + sigma2 I).
double gp_marginal_loglik(const GpPrior& prior, const MatrixXd& x, const VectorXd& y, double sigma2);

struct HyperBounds {
  double rho_lo, rho_hi;
  double sigma_g2_lo, sigma_g2_hi;
  double sigma2_lo, sigma2_hi;

  /// Bounds scaled to the spread of X and the variance of Y.
  static HyperBounds defaults_for(const MatrixXd& x, const VectorXd& y);
  void validate() const;
};

struct HyperFit {
  double rho = 0.0;
  double sigma_g2 = 0.0;
  double sigma2 = 0.0;
  double mean = 0.0;        // constant prior mean (sample mean of Y)
  double log_lik = 0.0;
  bool degenerate = false;  // Y constant: sigma_g2 pinned to 0

  GpPrior prior() const { return GpPrior::constant_mean(mean, KernelSpec{rho, sigma_g2}); }
};

/// Log-spaced grid of n points from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int n);

/// Empirical Bayes: maximise the marginal likelihood over a log grid of
/// `grid_points` per axis, then `refine_rounds` rounds of coordinate search.
/// The prior mean is fixed at the sample mean of Y.
HyperFit gp_optimize_hypers(const MatrixXd& x, const VectorXd& y, const HyperBounds& bounds,
                            int grid_points = 16, int refine_rounds = 2);
/// Same search with a trend Y = basis * beta + g + noise, beta under a flat
/// prior and integrated out (restricted likelihood). `mean` is reported as 0.
HyperFit gp_optimize_hypers(const MatrixXd& x, const VectorXd& y, const MatrixXd& basis, const HyperBounds& bounds,
                            int grid_points = 16, int refine_rounds = 2);

}  // namespace bnpc
