#pragma once

// Closed-form outcome and mediator models for exercising the estimand code.

#include <functional>
#include <span>

#include "bnpc/causal/estimands.hpp"
#include "bnpc/causal/mediation.hpp"

namespace testing_models {

using MeanFn = std::function<double(std::size_t b, double a, std::span<const double> x)>;

class FnOutcome : public bnpc::OutcomeModel {
 public:
  FnOutcome(std::size_t draws, int dim, MeanFn fn, double sd0 = 1.0, double sd1 = 1.0)
      : draws_(draws), dim_(dim), fn_(std::move(fn)), sd0_(sd0), sd1_(sd1) {}
  std::size_t n_draws() const override { return draws_; }
  int dim() const override { return dim_; }
  double mean(std::size_t b, double a, std::span<const double> x) const override { return fn_(b, a, x); }
  double noise_sd(std::size_t, double a) const override { return a == 1.0 ? sd1_ : sd0_; }

 private:
  std::size_t draws_;
  int dim_;
  MeanFn fn_;
  double sd0_, sd1_;
};

/// M = gamma a + x[0] * coef_x + Normal(0, sd^2).
class LinearMediator : public bnpc::MediatorModel {
 public:
  LinearMediator(std::size_t draws, int dim, double gamma, double coef_x, double sd)
      : draws_(draws), dim_(dim), gamma_(gamma), coef_x_(coef_x), sd_(sd) {}
  std::size_t n_draws() const override { return draws_; }
  int dim() const override { return dim_; }
  double sample(std::size_t, double a, std::span<const double> x, bnpc::RngStream& rng) const override {
    return gamma_ * a + coef_x_ * x[0] + sd_ * rng.normal();
  }

 private:
  std::size_t draws_;
  int dim_;
  double gamma_, coef_x_, sd_;
};

/// E(Y | a, m, x) = beta a + lambda m + x[0].
class LinearMediatedOutcome : public bnpc::MediatedOutcomeModel {
 public:
  LinearMediatedOutcome(std::size_t draws, int dim, double beta, double lambda)
      : draws_(draws), dim_(dim), beta_(beta), lambda_(lambda) {}
  std::size_t n_draws() const override { return draws_; }
  int dim() const override { return dim_; }
  double mean(std::size_t, double a, double m, std::span<const double> x) const override {
    return beta_ * a + lambda_ * m + x[0];
  }

 private:
  std::size_t draws_;
  int dim_;
  double beta_, lambda_;
};

}  // namespace testing_models
