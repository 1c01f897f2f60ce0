#pragma once

// Data-parallel kernels. Each has a serial reference version (kept for tests
// and benchmarks) and an OpenMP version that must return bit-identical
// results: every output slot is written by exactly one iteration, and any
// randomness comes from a per-index RngStream child.

#include <Eigen/Dense>

#include <cstddef>
#include <exception>
#include <span>
#include <vector>

namespace bnpc {

class DecisionTree;

namespace kernels {

/// Squared-exponential Gram matrix sigma_g2 * exp(-rho * |x_i - x_j|^2) over
/// the rows of `x`.
Eigen::MatrixXd sq_exp_gram_serial(const Eigen::MatrixXd& x, double rho, double sigma_g2);
Eigen::MatrixXd sq_exp_gram_omp(const Eigen::MatrixXd& x, double rho, double sigma_g2);

/// Cross-covariance between the rows of `a` and the rows of `b`.
Eigen::MatrixXd sq_exp_cross_serial(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double rho,
                                    double sigma_g2);
Eigen::MatrixXd sq_exp_cross_omp(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double rho,
                                 double sigma_g2);

/// Sum-of-trees prediction at every row of `x`.
std::vector<double> forest_predict_serial(std::span<const DecisionTree> trees,
                                          const Eigen::MatrixXd& x);
std::vector<double> forest_predict_omp(std::span<const DecisionTree> trees,
                                       const Eigen::MatrixXd& x);

/// out[i] = fn(i) for i in [0, n). `fn` must be safe to call concurrently for
/// distinct indices.
template <class Fn>
auto map_index_serial(std::size_t n, Fn&& fn) {
  using T = decltype(fn(std::size_t{0}));
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
  return out;
}

template <class Fn>
auto map_index_omp(std::size_t n, Fn&& fn) {
  using T = decltype(fn(std::size_t{0}));
  std::vector<T> out(n);
  const auto count = static_cast<long long>(n);
  std::exception_ptr failure;
  long long failed_at = count;
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < count; ++i) {
    try {
      out[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(bnpc_map_index_failure)
      {
        if (i < failed_at) {
          failed_at = i;
          failure = std::current_exception();
        }
      }
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace kernels
}  // namespace bnpc
