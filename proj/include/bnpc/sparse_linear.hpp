#pragma once

#include <optional>
#include <span>
#include <vector>

#include "bnpc/numerics.hpp"

namespace bnpc {

enum class Link { Identity, Probit };

/// Outcome link h1 and treatment link h2. The treatment link must be probit
/// for binary A.
struct LinkFunctions {
  Link outcome = Link::Identity;
  Link treatment = Link::Probit;
};

/// One posterior draw. Plain regressions only fill the outcome part; the
/// treatment part (alpha*, gamma_a) belongs to the joint treatment/outcome
/// models.
struct SpikeSlabState {
  double intercept = 0.0;  // beta_0
  double beta_a = 0.0;
  double beta_e = 0.0;
  VectorXd beta;
  VectorXd forced;         // coefficients on always-included columns
  std::vector<char> gamma;  // outcome inclusion (shared selection: both models)
  double alpha0 = 0.0;
  VectorXd alpha;
  std::vector<char> gamma_a;  // treatment inclusion (linked selection only)
  double tau = 0.5;
  double slab_var = 1.0;
  double slab_var_a = 1.0;
  double noise_var = 1.0;
  double treatment_noise_var = 1.0;  // 1 for the probit link
};

struct SpikeSlabConfig {
  int burn_in = 500;
  int n_draws = 1000;
  int thin = 1;
  double tau_a = 1.0;
  double tau_b = 1.0;
  std::optional<double> fixed_tau;
  double slab_shape = 1.0;
  double slab_scale = 1.0;
  std::optional<double> fixed_slab_var;
  double noise_shape = 1.0;
  double noise_scale = 0.1;  // multiplied by var(Y)
  std::optional<double> fixed_noise_var;
  double intercept_var = 100.0;
  /// Leading columns of X that are always included with a Normal(0,
  /// intercept_var) prior (e.g. the treatment column).
  int n_forced = 0;

  void validate() const;
};

struct SpikeSlabFit {
  std::vector<SpikeSlabState> draws;

  VectorXd inclusion_prob() const;
  VectorXd treatment_inclusion_prob() const;
  VectorXd beta_mean() const;
};

/// Gibbs sampler for Y = beta_0 + X beta + noise with independent
/// spike-and-slab priors on the selectable coefficients.
SpikeSlabFit spike_slab_gibbs(const MatrixXd& x, const VectorXd& y, const SpikeSlabConfig& config, RngStream& rng);

/// Prior probability that gamma_y = 1: varpi / (1 + varpi) when gamma_a = 1,
/// else 1/2.
double linked_prior_odds(bool gamma_a, double varpi);

enum class Selection { Shared, Linked };
enum class PropensityMode { Refresh, Prefit };

struct SharedSpikeSlabConfig {
  SpikeSlabConfig base;
  Selection selection = Selection::Shared;
  double varpi = 4.0;
  LinkFunctions links;
  bool propensity_term = true;
  PropensityMode propensity_mode = PropensityMode::Refresh;
  double treatment_slab_shape = 1.0;
  double treatment_slab_scale = 1.0;
  std::optional<double> fixed_treatment_slab_var;
  std::optional<double> fixed_treatment_noise_var;  // identity link only

  void validate() const;
};

/// Joint treatment/outcome linear model
///   h1^{-1} E(Y | a, x) = beta_0 + beta_a a + beta_e eta(x) + x'beta
///   eta(x) = h2^{-1} e(x) = alpha_0 + x'alpha
/// with shared (or linked) inclusion indicators. In Refresh mode eta is
/// recomputed from the current alpha every sweep; in Prefit mode it is fixed
/// at the posterior mean of a treatment-only fit.
SpikeSlabFit shared_spike_slab_gibbs(const MatrixXd& x, const VectorXd& a, const VectorXd& y,
                                     const SharedSpikeSlabConfig& config, RngStream& rng);

struct HorseshoeState {
  double intercept = 0.0;
  VectorXd forced;
  VectorXd beta;
  VectorXd lambda;  // local scales
  double v = 1.0;   // global scale
  double noise_var = 1.0;
};

struct HorseshoeConfig {
  int burn_in = 500;
  int n_draws = 1000;
  int thin = 1;
  double global_scale = 1.0;  // v ~ half-Cauchy(0, global_scale)
  double noise_shape = 1.0;
  double noise_scale = 0.1;  // multiplied by var(Y)
  double intercept_var = 100.0;
  int n_forced = 0;

  void validate() const;
};

struct HorseshoeFit {
  std::vector<HorseshoeState> draws;
  VectorXd beta_mean() const;
};

/// beta_j ~ Normal(0, lambda_j^2), lambda_j = v * l_j, l_j ~ half-Cauchy(0, 1),
/// sampled through inverse-gamma auxiliary variables.
HorseshoeFit horseshoe_gibbs(const MatrixXd& x, const VectorXd& y, const HorseshoeConfig& config, RngStream& rng);

/// One prior draw of a horseshoe coefficient with global scale v.
double horseshoe_prior_draw(double v, RngStream& rng);

struct HahnReparamState {
  double beta_a = 0.0;
  VectorXd beta_c;
  VectorXd beta_d;
  double c0 = 0.0;  // treatment-model intercept
  double d0 = 0.0;  // outcome-model intercept
  double noise_var = 1.0;
  double treatment_noise_var = 1.0;
};

struct HahnReparamFit {
  std::vector<HahnReparamState> draws;
  double beta_a_mean() const;
};

/// E(Y | a, x) = beta_a (a - c0 - x'beta_c) + d0 + x'beta_d, E(A | x) = c0 + x'beta_c,
/// with independent horseshoe priors on beta_c and beta_d.
HahnReparamFit hahn_reparam_fit(const MatrixXd& x, const VectorXd& a, const VectorXd& y,
                                const HorseshoeConfig& config, RngStream& rng);

}  // namespace bnpc
