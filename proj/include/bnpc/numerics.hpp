#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "bnpc/errors.hpp"

namespace bnpc {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Seeded random stream. Two streams built from the same (seed, stream_id)
/// produce identical sequences; children derived with split() are keyed by
/// an index, so per-draw and per-replicate work can be farmed out to threads
/// without changing results.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id);

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Independent child stream keyed by `child`. Does not advance this stream.
  RngStream split(std::uint64_t child) const;

  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();

  /// Full engine state, for checkpointing.
  std::string state() const;
  void set_state(const std::string& state);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

/// Dense symmetric matrix. Construction checks symmetry to 1e-12 relative.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(MatrixXd m);

  static SymMatrix identity(Eigen::Index n) { return SymMatrix(MatrixXd::Identity(n, n)); }
  static SymMatrix diagonal(const VectorXd& d) { return SymMatrix(MatrixXd(d.asDiagonal())); }

  Eigen::Index size() const { return m_.rows(); }
  const MatrixXd& matrix() const { return m_; }

 private:
  MatrixXd m_;
};

/// Lower Cholesky factor of A (+ jitter on the diagonal if the first attempt
/// failed). Jitter is 1e-8 * trace(A) / n, applied at most once.
struct CholeskyFactor {
  Eigen::LLT<MatrixXd> llt;
  double jitter = 0.0;

  VectorXd solve(const VectorXd& b) const { return llt.solve(b); }
  MatrixXd solve(const MatrixXd& b) const { return llt.solve(b); }
  double log_det() const;
  MatrixXd lower() const { return llt.matrixL(); }
};

CholeskyFactor cholesky(const MatrixXd& a);
VectorXd cholesky_solve(const SymMatrix& a, const VectorXd& b);

// Scalar distributions.
double sample_gamma(double shape, double rate, RngStream& rng);
double sample_inverse_gamma(double shape, double scale, RngStream& rng);
double sample_beta(double a, double b, RngStream& rng);
double sample_half_cauchy(double scale, RngStream& rng);
double sample_chi_squared(double dof, RngStream& rng);

enum class TruncationSide { Left, Right };

/// Normal(mean, sd^2) restricted to the given side of `bound` (Left: x < bound,
/// Right: x > bound).
double sample_truncated_normal(double mean, double sd, TruncationSide side, double bound,
                               RngStream& rng);

std::vector<double> sample_dirichlet(std::span<const double> alpha, RngStream& rng);

/// Index drawn with probability proportional to `weights` (non-negative).
std::size_t sample_categorical(std::span<const double> weights, RngStream& rng);
/// Same, for unnormalised log weights.
std::size_t sample_categorical_log(std::span<const double> log_weights, RngStream& rng);

/// Draw from Normal(mean, cov). Falls back to an eigendecomposition when the
/// covariance is only semi-definite (e.g. the zero matrix).
VectorXd sample_mvn(const VectorXd& mean, const SymMatrix& cov, RngStream& rng);

double normal_cdf(double x);
double normal_quantile(double p);
double log_normal_pdf(double x, double mean, double var);
double log_sum_exp(std::span<const double> v);

/// Linear interpolation between adjacent order statistics (type-7 quantile).
double quantile_sorted(std::span<const double> sorted, double prob);
double quantile(std::vector<double> v, double prob);
double mean(std::span<const double> v);
double variance(std::span<const double> v);

}  // namespace bnpc
