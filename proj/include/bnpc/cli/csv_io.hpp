#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bnpc/causal/dataset.hpp"

namespace bnpc::cli {

/// Column roles. Empty `covariates` means every column not otherwise assigned.
struct Schema {
  std::string outcome = "y";
  std::string treatment = "a";
  std::optional<std::string> mediator;
  std::optional<std::string> running;
  std::vector<std::string> covariates;
};

/// Comma-separated text with a header row; empty cells are missing.
Dataset read_dataset(std::istream& is, const Schema& schema);
Dataset read_dataset(const std::filesystem::path& path, const Schema& schema);

/// Writes columns y, a, (m), then covariates, with 17 significant digits.
void write_dataset(std::ostream& os, const Dataset& data, const Schema& schema);
void write_dataset(const std::filesystem::path& path, const Dataset& data, const Schema& schema);

/// Schema matching the column names produced by write_dataset.
Schema schema_for(const Dataset& data);

std::string format_double(double v);

}  // namespace bnpc::cli
