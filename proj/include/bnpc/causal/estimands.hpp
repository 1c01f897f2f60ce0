#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bnpc/causal/dataset.hpp"
#include "bnpc/covariate_models.hpp"

namespace bnpc {

/// Posterior draws of E(Y | A = a, X = x) with normal noise around it.
class OutcomeModel {
 public:
  virtual ~OutcomeModel() = default;
  virtual std::size_t n_draws() const = 0;
  virtual int dim() const = 0;
  virtual double mean(std::size_t b, double a, std::span<const double> x) const = 0;
  virtual double noise_sd(std::size_t b, double a) const = 0;
  /// E(Y | 1, x) - E(Y | 0, x) for draw b.
  virtual double effect(std::size_t b, std::span<const double> x) const { return mean(b, 1.0, x) - mean(b, 0.0, x); }
};

struct EstimandResult {
  std::string name;
  std::vector<double> draws;   // psi(theta_b)
  std::vector<double> mc_var;  // s_b^2 per draw; empty when computed exactly
  double level = 0.95;
  double estimate = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double mc_se = 0.0;   // sqrt(mean s_b^2)
  bool mc_ok = true;    // mean s_b^2 < 0.1 * var(psi_b)
  std::vector<std::string> warnings;

  double posterior_sd() const;
};

/// Posterior mean, equal-tailed interval from order statistics, and the
/// Monte Carlo diagnostics.
EstimandResult summarize(std::string name, std::vector<double> draws, std::vector<double> mc_var, double level);

/// Indices (lo, hi) of the order statistics bounding a level-q interval from B draws.
std::pair<std::size_t, std::size_t> interval_indices(std::size_t b, double level);

EstimandResult cate(const OutcomeModel& model, std::span<const double> x, double level = 0.95);
EstimandResult sate(const OutcomeModel& model, const MatrixXd& x, double level = 0.95);

/// Bayesian-bootstrap PATE: one Dirichlet weight draw per posterior draw,
/// using child stream b of `rng`.
EstimandResult pate_bb(const OutcomeModel& model, const BayesianBootstrapPosterior& post, RngStream& rng,
                       double level = 0.95);

struct McResult {
  double psi = 0.0;
  double s2 = 0.0;
};

/// Monte Carlo PATE for one posterior draw with N*K covariate samples.
McResult pate_mc_draw(const OutcomeModel& model, std::size_t b, CovariateSampler& sampler, int n, int k,
                      RngStream& rng);
EstimandResult pate_mc(const OutcomeModel& model, const CovariateLaw& law, int n, int k, RngStream& rng,
                       double level = 0.95);

/// alpha-quantile effect for one posterior draw, K pseudo-datasets of size N.
McResult quantile_effect_draw(const OutcomeModel& model, std::size_t b, CovariateSampler& sampler, double alpha, int n,
                              int k, RngStream& rng);
EstimandResult quantile_effect(const OutcomeModel& model, const CovariateLaw& law, double alpha, int n, int k,
                               RngStream& rng, double level = 0.95);
inline EstimandResult median_effect(const OutcomeModel& model, const CovariateLaw& law, int n, int k, RngStream& rng,
                                    double level = 0.95) {
  return quantile_effect(model, law, 0.5, n, k, rng, level);
}

using RowPredicate = std::function<bool(std::span<const double>)>;

/// Bayesian-bootstrap mean of the effect over units with A = 1.
EstimandResult att(const OutcomeModel& model, const Dataset& data, RngStream& rng, double level = 0.95);
/// Bayesian-bootstrap mean of the effect over atoms satisfying `pred`; the
/// weights are the full-population draws of pate_bb renormalized.
EstimandResult subgroup_effect(const OutcomeModel& model, const BayesianBootstrapPosterior& post,
                               const RowPredicate& pred, RngStream& rng, double level = 0.95);

}  // namespace bnpc
