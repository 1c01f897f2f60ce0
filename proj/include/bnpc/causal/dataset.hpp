#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bnpc/numerics.hpp"

namespace bnpc {

/// Observed data (Y, A, X) with optional mediator M. Missing covariates are NaN.
struct Dataset {
  VectorXd y;
  VectorXd a;
  MatrixXd x;
  std::optional<VectorXd> m;
  std::optional<int> running;  // covariate column used as the RDD running variable
  std::vector<std::string> covariate_names;

  Eigen::Index n() const { return y.size(); }
  Eigen::Index p() const { return x.cols(); }
  bool has_missing() const;
  int n_treated() const;

  /// Equal lengths, binary A, finite Y/A/M.
  void validate() const;
  /// A_i == 1[X_running >= cutoff] for every row.
  void validate_sharp_rdd(double cutoff) const;

  Dataset rows(const std::vector<int>& idx) const;
};

}  // namespace bnpc
