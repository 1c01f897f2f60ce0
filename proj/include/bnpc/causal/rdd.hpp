#pragma once

#include "bnpc/causal/dataset.hpp"
#include "bnpc/causal/estimands.hpp"
#include "bnpc/gp.hpp"

namespace bnpc {

struct RddConfig {
  double cutoff = 0.0;
  int n_draws = 1000;
  double level = 0.95;
  int min_side = 10;
  int grid_points = 16;
  int refine_rounds = 2;

  void validate() const;
};

struct RddResult {
  EstimandResult effect;  // g1(b) - g0(b)
  HyperFit below;         // fit on X < b
  HyperFit above;         // fit on X >= b
  double mean0 = 0.0, var0 = 0.0;  // posterior of g0(b)
  double mean1 = 0.0, var1 = 0.0;  // posterior of g1(b)
};

/// Sharp RDD with one GP per side of the cutoff.
RddResult rdd_fit(const VectorXd& running, const VectorXd& a, const VectorXd& y, const RddConfig& config,
                  RngStream& rng);
RddResult rdd_fit(const Dataset& data, const RddConfig& config, RngStream& rng);

}  // namespace bnpc
