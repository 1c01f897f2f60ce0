#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bnpc/cli/csv_io.hpp"

namespace bnpc::cli {

using KeyValues = std::map<std::string, std::string>;

/// Line-oriented "key = value" text; '#' starts a comment.
KeyValues parse_key_values(std::istream& is);
KeyValues read_key_values(const std::filesystem::path& path);
void write_key_values(std::ostream& os, const KeyValues& kv);

struct RunConfig {
  std::string model = "bcf";  // bcf, bart, gp, sparse_shared, sparse_horseshoe, hahn_reparam, imm
  int iterations = 1500;      // per chain, including burn-in
  int burn_in = 500;
  int chains = 1;
  int thin = 1;
  std::uint64_t seed = 1;
  std::vector<std::string> estimands{"pate"};
  int k = 0;  // 0: 1 for PATE, 10 for quantile and mediation effects
  double level = 0.95;
  std::string covariate_law = "bayesian_bootstrap";  // or imm
  Schema schema;
  std::string propensity = "probit_bart";  // probit_bart, gp_probit, none
  int n_trees = 200;
  int tau_trees = 50;
  bool arm_noise = false;
  std::string selection = "shared";  // shared, linked
  double varpi = 4.0;
  std::string propensity_mode = "refresh";  // refresh, prefit
  int imm_truncation = 50;
  double alpha = 0.5;
  int bins = 30;

  int n_draws() const { return (iterations - burn_in) / thin; }
  int k_for(const std::string& estimand) const;

  static RunConfig from_key_values(const KeyValues& kv);
  KeyValues to_key_values() const;
  void validate() const;
};

const std::vector<std::string>& config_keys();

}  // namespace bnpc::cli
