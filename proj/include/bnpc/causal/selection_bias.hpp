#pragma once

#include <span>
#include <vector>

#include "bnpc/numerics.hpp"

namespace bnpc {

/// Delta(1) = sd(e) sd(g) cor(e, g) / E(e) over a discrete law with weights w.
double selection_bias(std::span<const double> e, std::span<const double> g1, std::span<const double> w);
/// E[g(1, X) | A = 1] - E[g(1, X)] computed directly from the same law.
double selection_bias_direct(std::span<const double> e, std::span<const double> g1, std::span<const double> w);

struct RicConfig {
  std::vector<int> p_values{1, 10, 50};
  int n_draws = 500;
  int n_atoms = 1000;
  int n_trees = 200;
  double a_split = 0.95;
  double b_split = 2.0;
  double k = 2.0;

  void validate() const;
};

struct RicRow {
  int p = 0;
  std::vector<double> delta;
  double sd = 0.0;
};

struct RicDiagnostic {
  std::vector<RicRow> rows;
  /// Strictly decreasing SDs; only meaningful with two or more rows.
  bool decreasing() const;
};

/// Prior draws of Delta(1) under independent BART priors on g(1, .) and
/// Phi^{-1}(e(.)) with uniform covariates on [0, 1]^P.
RicDiagnostic ric_prior_diagnostic(const RicConfig& config, RngStream& rng);

}  // namespace bnpc
