#pragma once

#include <memory>
#include <span>

#include "bnpc/bart.hpp"
#include "bnpc/causal/dataset.hpp"
#include "bnpc/causal/estimands.hpp"
#include "bnpc/causal/propensity.hpp"

namespace bnpc {

/// Draws of the mediator law f(M | A = a, X = x).
class MediatorModel {
 public:
  virtual ~MediatorModel() = default;
  virtual std::size_t n_draws() const = 0;
  virtual int dim() const = 0;
  virtual double sample(std::size_t b, double a, std::span<const double> x, RngStream& rng) const = 0;
};

/// Draws of E(Y | A = a, M = m, X = x).
class MediatedOutcomeModel {
 public:
  virtual ~MediatedOutcomeModel() = default;
  virtual std::size_t n_draws() const = 0;
  virtual int dim() const = 0;
  virtual double mean(std::size_t b, double a, double m, std::span<const double> x) const = 0;
};

/// BART over [a, x, (e_hat)] with normal noise.
class BartMediatorModel : public MediatorModel {
 public:
  BartMediatorModel(BartFit fit, std::shared_ptr<const PropensityModel> prop, int p);
  std::size_t n_draws() const override { return fit_.draws.size(); }
  int dim() const override { return p_; }
  double sample(std::size_t b, double a, std::span<const double> x, RngStream& rng) const override;
  const BartFit& fit() const { return fit_; }

 private:
  BartFit fit_;
  std::shared_ptr<const PropensityModel> prop_;
  int p_;
};

/// BART over [a, m, x, (e_hat)].
class BartMediatedOutcome : public MediatedOutcomeModel {
 public:
  BartMediatedOutcome(BartFit fit, std::shared_ptr<const PropensityModel> prop, int p);
  std::size_t n_draws() const override { return fit_.draws.size(); }
  int dim() const override { return p_; }
  double mean(std::size_t b, double a, double m, std::span<const double> x) const override;
  const BartFit& fit() const { return fit_; }

 private:
  BartFit fit_;
  std::shared_ptr<const PropensityModel> prop_;
  int p_;
};

struct MediationModels {
  std::unique_ptr<BartMediatorModel> mediator;
  std::unique_ptr<BartMediatedOutcome> outcome;
};

/// Fits r_m(a, x) and r_y(m, a, x), both with the propensity column when `prop` is set.
MediationModels fit_mediation_models(const Dataset& data, std::shared_ptr<const PropensityModel> prop,
                                     const BartConfig& config, RngStream& rng);

struct MediationResult {
  EstimandResult zeta0, zeta1;    // natural direct effects
  EstimandResult delta0, delta1;  // natural indirect effects
  EstimandResult total;           // mu(1, 1) - mu(0, 0)
};

struct MediationDraw {
  double zeta[2] = {0.0, 0.0};
  double delta[2] = {0.0, 0.0};
  double total = 0.0;
  double s2_zeta[2] = {0.0, 0.0};
  double s2_delta[2] = {0.0, 0.0};
  double s2_total = 0.0;
};

/// Monte Carlo mediation for one posterior draw with N*K covariate samples.
MediationDraw mediation_draw(const MediatedOutcomeModel& outcome, const MediatorModel& mediator, std::size_t b,
                             CovariateSampler& sampler, int n, int k, RngStream& rng);

MediationResult mediation_effects(const MediatedOutcomeModel& outcome, const MediatorModel& mediator,
                                  const CovariateLaw& law, int n, int k, RngStream& rng, double level = 0.95);

}  // namespace bnpc
