#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "bnpc/numerics.hpp"

namespace bnpc {

// Missing covariate entries are stored as NaN throughout.
bool is_missing(double v);

/// Dirichlet(m_1, ..., m_J) posterior over the distinct rows of X.
struct BayesianBootstrapPosterior {
  MatrixXd atoms;              // J x P, first-occurrence order
  std::vector<double> counts;  // m_j
  std::vector<int> atom_of_row;
  int n = 0;
};

BayesianBootstrapPosterior bb_posterior(const MatrixXd& x);
std::vector<double> bb_sample_weights(const BayesianBootstrapPosterior& post, RngStream& rng);

/// omega_k = omega'_k prod_{l<k} (1 - omega'_l). The last raw stick must be 1.
std::vector<double> stick_break(std::span<const double> raw_sticks);

/// 1 + alpha * sum_{i=0}^{N-1} 1 / (alpha + i).
double expected_cluster_count(double alpha, int n);
/// E[M] under the Chinese restaurant process: sum_{i=0}^{N-1} alpha / (alpha + i).
double exact_expected_cluster_count(double alpha, int n);

/// Distinct labels among N draws from a K'-truncated stick-breaking prior,
/// repeated `reps` times.
std::vector<int> simulate_cluster_counts(double alpha, int n, int truncation, int reps, RngStream& rng);

enum class ColumnKind { Continuous, Binary };

/// Truncated mixture with within-component independence: each coordinate is
/// Normal(loc, scale2) when continuous and Bernoulli(loc) when binary.
struct StickBreakingMixture {
  std::vector<double> sticks;   // raw omega', last = 1
  std::vector<double> weights;  // omega
  double alpha = 1.0;
  std::vector<ColumnKind> kinds;
  MatrixXd loc;     // K' x P
  MatrixXd scale2;  // K' x P, unused for binary columns

  int n_components() const { return static_cast<int>(weights.size()); }
  int dim() const { return static_cast<int>(kinds.size()); }
  /// log q(x_o | theta_k) over the non-missing coordinates of x.
  double log_component_density(int k, std::span<const double> x) const;
  double log_density(std::span<const double> x) const;
  /// Class probabilities given the observed coordinates.
  std::vector<double> class_posterior(std::span<const double> x) const;
  /// Fill the missing coordinates of x from the conditional law.
  std::vector<double> sample_conditional(std::span<const double> x, RngStream& rng) const;
  std::vector<double> sample(RngStream& rng) const;
};

double imm_log_likelihood(const StickBreakingMixture& mix, const MatrixXd& x);

/// Conditional density of the missing coordinates of `x` (NaN entries) at
/// `x_missing`, listed in column order.
double imm_conditional_density(const StickBreakingMixture& mix, std::span<const double> x,
                               std::span<const double> x_missing);

enum class WeightUpdate { StickBreaking, SymmetricDirichlet };

struct ImmConfig {
  int truncation = 50;
  int burn_in = 500;
  int n_draws = 500;
  int thin = 1;
  WeightUpdate weight_update = WeightUpdate::StickBreaking;
  std::optional<double> fixed_alpha;
  double alpha_shape = 1.0;
  double alpha_rate = 1.0;
  double kappa0 = 0.1;  // prior sample size for component means
  double a0 = 2.0;      // inverse-gamma shape for component variances; scale is (a0 - 1) * var / 2
  std::vector<ColumnKind> kinds;  // empty: binary iff all observed values are 0/1

  void validate() const;
};

struct ImmFit {
  std::vector<StickBreakingMixture> draws;
  std::vector<MatrixXd> imputed;  // X with missing entries filled, per draw
  std::vector<std::vector<int>> labels;
};

ImmFit imm_fit(const MatrixXd& x, const ImmConfig& config, RngStream& rng);

using LikelihoodCallback = std::function<double(std::span<const double>)>;

/// One independence Metropolis-Hastings step for a unit's missing
/// coordinates: propose from the mixture conditional, accept with
/// min(1, f(new) / f(old)). `current` holds the unit's current full record;
/// `missing` flags which coordinates are free.
std::vector<double> imm_impute_mh(const StickBreakingMixture& mix, std::span<const double> current,
                                  std::span<const char> missing, const LikelihoodCallback& likelihood,
                                  RngStream& rng);

/// Draws covariate rows for one posterior draw.
class CovariateSampler {
 public:
  virtual ~CovariateSampler() = default;
  virtual std::vector<double> draw(RngStream& rng) = 0;
};

/// The covariate law f_theta(x) across posterior draws.
class CovariateLaw {
 public:
  virtual ~CovariateLaw() = default;
  virtual int dim() const = 0;
  virtual std::unique_ptr<CovariateSampler> for_draw(std::size_t b, RngStream& rng) const = 0;
};

/// Discrete law over atoms with cumulative-weight lookup.
class DiscreteSampler : public CovariateSampler {
 public:
  DiscreteSampler(const MatrixXd* atoms, std::vector<double> weights);
  std::vector<double> draw(RngStream& rng) override;
  std::size_t draw_index(RngStream& rng) const;

 private:
  const MatrixXd* atoms_;
  std::vector<double> cumulative_;
};

/// Fresh Dirichlet weights per posterior draw.
class BootstrapLaw : public CovariateLaw {
 public:
  explicit BootstrapLaw(BayesianBootstrapPosterior post) : post_(std::move(post)) {}
  int dim() const override { return static_cast<int>(post_.atoms.cols()); }
  std::unique_ptr<CovariateSampler> for_draw(std::size_t b, RngStream& rng) const override;
  const BayesianBootstrapPosterior& posterior() const { return post_; }

 private:
  BayesianBootstrapPosterior post_;
};

/// Same atoms and weights for every posterior draw.
class FixedDiscreteLaw : public CovariateLaw {
 public:
  FixedDiscreteLaw(MatrixXd atoms, std::vector<double> weights);
  int dim() const override { return static_cast<int>(atoms_.cols()); }
  std::unique_ptr<CovariateSampler> for_draw(std::size_t b, RngStream& rng) const override;

 private:
  MatrixXd atoms_;
  std::vector<double> weights_;
};

/// Mixture predictive; posterior draw b uses mixture draw b mod B.
class MixtureLaw : public CovariateLaw {
 public:
  explicit MixtureLaw(std::vector<StickBreakingMixture> draws);
  int dim() const override { return draws_.front().dim(); }
  std::unique_ptr<CovariateSampler> for_draw(std::size_t b, RngStream& rng) const override;

 private:
  std::vector<StickBreakingMixture> draws_;
};

}  // namespace bnpc
