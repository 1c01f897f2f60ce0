#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "bnpc/causal/dataset.hpp"

namespace bnpc::cli {

struct DgpSpec {
  std::string name = "linear_confounded";
  int n = 500;
  int p = 10;
  std::uint64_t seed = 1;
  /// Optional overrides: effect, noise_sd, jump, cutoff, gamma, beta, lambda, rate.
  std::map<std::string, double> params;

  double param(const std::string& key, double fallback) const;
  void validate() const;
};

struct GroundTruth {
  std::map<std::string, double> values;  // e.g. pate, median_effect, delta, zeta, rdd_effect
  std::string method;                     // "analytic"
};

struct Simulation {
  Dataset data;
  GroundTruth truth;
};

const std::vector<std::string>& dgp_names();
Simulation simulate(const DgpSpec& spec);

}  // namespace bnpc::cli
