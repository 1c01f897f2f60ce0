#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bnpc/causal/dataset.hpp"
#include "bnpc/causal/estimands.hpp"
#include "bnpc/causal/propensity.hpp"
#include "bnpc/causal/selection_bias.hpp"
#include "bnpc/cli/config.hpp"

namespace bnpc::cli {

namespace fs = std::filesystem;

struct FitOptions {
  std::optional<int> stop_after;  // write a checkpoint and stop after this many iterations
  bool resume = false;
};

enum class FitStatus { Complete, Interrupted };

/// Fits the configured model and writes the posterior store to `store`.
FitStatus run_fit(const RunConfig& config, const Dataset& data, const fs::path& store, const FitOptions& options = {});

struct EstimateRequest {
  std::vector<std::string> estimands;  // empty: the estimands listed in the stored config
  std::optional<std::uint64_t> seed;
  std::optional<int> k;
  std::optional<double> level;
  std::optional<std::string> law;
  std::optional<double> alpha;
  std::optional<int> bins;
  std::vector<double> x;  // CATE query point
  std::string subgroup;   // e.g. "x1 > 0 & x2 <= 1"
  std::optional<fs::path> draws_prefix;
};

struct SummaryRecord {
  std::string estimand;
  double estimate = 0.0;
  double ci_lower = 0.0;
  double ci_upper = 0.0;
  double level = 0.95;
  double mc_se = 0.0;
  std::size_t n_draws = 0;
  std::uint64_t seed = 0;
  bool mc_ok = true;
  std::vector<double> edges;
  std::vector<int> counts;
  std::vector<std::string> warnings;
  std::vector<double> draws;
};

SummaryRecord make_record(const EstimandResult& r, std::uint64_t seed, int bins);
std::string record_json(const SummaryRecord& r);
std::string records_json(const std::vector<SummaryRecord>& rs);  // one object per line

std::vector<SummaryRecord> run_estimate(const fs::path& store, const EstimateRequest& request);

std::vector<SummaryRecord> run_mediate(const RunConfig& config, const Dataset& data);

SummaryRecord run_rdd(const Dataset& data, double cutoff, int n_draws, double level, std::uint64_t seed);

/// Conjunction of comparisons "name op value" joined by '&'.
RowPredicate parse_predicate(const std::string& expr, const std::vector<std::string>& names);

std::string ric_report_json(const RicDiagnostic& d, std::uint64_t seed);
std::string overlap_report_json(const OverlapReport& r);

/// Loads the propensity model and training covariates of a store.
OverlapReport store_overlap(const fs::path& store, double epsilon);

}  // namespace bnpc::cli
