#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "bnpc/bart.hpp"
#include "bnpc/causal/dataset.hpp"
#include "bnpc/causal/estimands.hpp"
#include "bnpc/causal/propensity.hpp"

namespace bnpc {

struct BcfConfig {
  int mu_trees = 200;
  double mu_a = 0.95;
  double mu_b = 2.0;
  int tau_trees = 50;
  double tau_a = 0.25;
  double tau_b = 3.0;
  double tau_leaf_scale = 0.5;  // multiplies the default leaf sd of the effect forest
  double k = 2.0;
  int burn_in = 500;
  int n_draws = 1000;
  int thin = 1;
  double sigma_nu = 3.0;
  double sigma_quantile = 0.9;
  bool include_propensity = true;
  bool arm_noise = false;  // separate noise variances for the two arms

  /// Effect forest with the same settings as the prognostic forest.
  static BcfConfig symmetric();
  void validate() const;
};

/// One posterior draw on the original outcome scale.
struct BcfDraw {
  BartForest mu;   // over [x, e_hat(x)] (or x alone without the propensity column)
  BartForest tau;  // over x
  double sigma0 = 1.0;
  double sigma1 = 1.0;
};

/// Y = mu(x, e_hat) + a tau(x) + noise, fitted by backfitting two forests.
class BcfChain {
 public:
  BcfChain(const MatrixXd& x, const VectorXd& a, const VectorXd& y, std::span<const double> e_hat,
           const BcfConfig& config);

  void step(RngStream& rng);
  BcfDraw current() const;

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  void update_noise(RngStream& rng);
  void refresh_weights();

  BcfConfig config_;
  VectorXd a_;
  VectorXd y_;  // standardized
  std::vector<int> treated_;
  double y_offset_ = 0.0;
  double y_scale_ = 1.0;
  double lambda_ = 1.0;
  double sigma0_ = 1.0;
  double sigma1_ = 1.0;
  ForestSampler mu_;
  ForestSampler tau_;
  std::vector<double> target_mu_;
  std::vector<double> target_tau_;
};

class BcfFit : public OutcomeModel {
 public:
  BcfFit(std::vector<BcfDraw> draws, std::shared_ptr<const PropensityModel> prop, bool include_propensity, int p);

  std::size_t n_draws() const override { return draws_.size(); }
  int dim() const override { return p_; }
  double mean(std::size_t b, double a, std::span<const double> x) const override;
  double noise_sd(std::size_t b, double a) const override;
  double effect(std::size_t b, std::span<const double> x) const override;

  const std::vector<BcfDraw>& draws() const { return draws_; }
  const PropensityModel* propensity() const { return prop_.get(); }
  bool include_propensity() const { return include_propensity_; }

 private:
  std::vector<BcfDraw> draws_;
  std::shared_ptr<const PropensityModel> prop_;
  bool include_propensity_;
  int p_;
};

BcfFit fit_bcf(const Dataset& data, std::shared_ptr<const PropensityModel> prop, const BcfConfig& config,
               RngStream& rng);

/// Single-forest BART over [a, x] or [a, x, e_hat(x)].
class BartOutcome : public OutcomeModel {
 public:
  BartOutcome(std::vector<BartForest> draws, std::vector<double> sigma, std::shared_ptr<const PropensityModel> prop,
              int p);

  std::size_t n_draws() const override { return draws_.size(); }
  int dim() const override { return p_; }
  double mean(std::size_t b, double a, std::span<const double> x) const override;
  double noise_sd(std::size_t b, double) const override { return sigma_[b]; }

  const std::vector<BartForest>& draws() const { return draws_; }
  const std::vector<double>& sigma() const { return sigma_; }

 private:
  std::vector<BartForest> draws_;
  std::vector<double> sigma_;
  std::shared_ptr<const PropensityModel> prop_;
  int p_;
};

BartOutcome fit_bart_outcome(const Dataset& data, std::shared_ptr<const PropensityModel> prop,
                             const BartConfig& config, RngStream& rng);

/// Design matrix [a, x, (e_hat)] used by BartOutcome.
MatrixXd bart_outcome_design(const VectorXd& a, const MatrixXd& x, const PropensityModel* prop);

}  // namespace bnpc
