#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "bnpc/bart.hpp"
#include "bnpc/causal/dataset.hpp"
#include "bnpc/gp.hpp"

namespace bnpc {

enum class PropensityMethod { ProbitBart, GpProbit };

struct PropensityConfig {
  PropensityMethod method = PropensityMethod::ProbitBart;
  BartConfig bart = default_bart();
  // GP probit uses a fixed kernel; rho <= 0 picks 1 / (P * mean column variance).
  double gp_rho = 0.0;
  double gp_sigma_g2 = 1.0;
  int gp_burn_in = 200;
  int gp_draws = 300;
  // Forests kept for evaluation away from the training rows.
  int prediction_draws = 25;

  static BartConfig default_bart();
  void validate() const;
};

/// e(x) = P(A = 1 | x), fitted from (A, X) only.
class PropensityModel {
 public:
  PropensityModel() = default;

  PropensityMethod method() const { return method_; }
  const std::vector<double>& e_hat() const { return e_hat_; }
  bool independent_of_y() const { return true; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  int dim() const { return static_cast<int>(train_x_.cols()); }

  /// Training rows are answered from e_hat; other points from the retained draws.
  double predict(std::span<const double> x) const;
  std::vector<double> predict_rows(const MatrixXd& x) const;

  void save(std::ostream& os) const;
  static PropensityModel load(std::istream& is);

 private:
  friend PropensityModel fit_propensity(const MatrixXd&, const VectorXd&, const PropensityConfig&, RngStream&);

  void finish();
  double predict_new(std::span<const double> x) const;

  PropensityMethod method_ = PropensityMethod::ProbitBart;
  std::vector<double> e_hat_;
  std::vector<std::string> warnings_;
  MatrixXd train_x_;
  std::vector<BartForest> forests_;
  KernelSpec kernel_;
  VectorXd gp_alpha_;  // (K + I)^{-1} zbar
  std::shared_ptr<const CholeskyFactor> gp_factor_;
  std::unordered_map<std::string, std::size_t> row_index_;
};

PropensityModel fit_propensity(const MatrixXd& x, const VectorXd& a, const PropensityConfig& config, RngStream& rng);
inline PropensityModel fit_propensity(const Dataset& data, const PropensityConfig& config, RngStream& rng) {
  return fit_propensity(data.x, data.a, config, rng);
}

/// e_hat clamped into (0, 1) for use as a covariate.
double clamp_propensity(double e);

struct OverlapReport {
  double epsilon = 0.0;
  std::vector<int> below;  // e_hat < epsilon
  std::vector<int> above;  // e_hat > 1 - epsilon
  std::size_t n_violations() const { return below.size() + above.size(); }
  std::string message() const;
};

OverlapReport check_overlap(std::span<const double> e_hat, double epsilon);
inline OverlapReport check_overlap(const PropensityModel& prop, double epsilon) {
  return check_overlap(prop.e_hat(), epsilon);
}

}  // namespace bnpc
