#pragma once

// Independent reference computations used by unit and acceptance tests. They
// deliberately avoid the library's factorizations and kernels.

#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline double sq_exp(const VectorXd& x, const VectorXd& xp, double rho, double sigma_g2) {
  double d2 = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) d2 += (x(i) - xp(i)) * (x(i) - xp(i));
  return sigma_g2 * std::exp(-rho * d2);
}

inline MatrixXd cross(const MatrixXd& a, const MatrixXd& b, double rho, double sigma_g2) {
  MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = sq_exp(a.row(i).transpose(), b.row(j).transpose(), rho, sigma_g2);
  }
  return k;
}

struct Conditioned {
  VectorXd mean;
  MatrixXd cov;
};

/// Builds the joint normal of (g(Q), Y) and conditions on Y with the
/// partitioned-Gaussian formulas, using a full-pivot LU inverse.
inline Conditioned condition_joint(double prior_mean, double rho, double sigma_g2, const MatrixXd& x, const VectorXd& y,
                                   double sigma2, const MatrixXd& q) {
  const Eigen::Index n = x.rows();
  const Eigen::Index m = q.rows();
  MatrixXd joint_x(m + n, x.cols());
  joint_x << q, x;
  MatrixXd s = cross(joint_x, joint_x, rho, sigma_g2);
  s.bottomRightCorner(n, n) += sigma2 * MatrixXd::Identity(n, n);
  const MatrixXd s_qq = s.topLeftCorner(m, m);
  const MatrixXd s_qy = s.topRightCorner(m, n);
  const MatrixXd s_yy_inv = s.bottomRightCorner(n, n).fullPivLu().inverse();
  Conditioned c;
  c.mean = VectorXd::Constant(m, prior_mean) + s_qy * s_yy_inv * (y - VectorXd::Constant(n, prior_mean));
  c.cov = s_qq - s_qy * s_yy_inv * s_qy.transpose();
  return c;
}

/// log N(y | mu, cov) from the determinant and inverse, no Cholesky.
inline double dense_log_normal(const VectorXd& y, const VectorXd& mu, const MatrixXd& cov) {
  const auto lu = cov.fullPivLu();
  const VectorXd r = y - mu;
  const double quad = r.dot(lu.inverse() * r);
  return -0.5 * (static_cast<double>(y.size()) * std::log(2.0 * std::numbers::pi) + std::log(lu.determinant()) + quad);
}

inline double log_beta_fn(double a, double b) { return std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b); }

/// Posterior inclusion probabilities by exhaustive enumeration of 2^P models.
/// `log_marginal(mask)` gives log p(data | gamma); the model prior is the
/// Beta(a, b)-binomial obtained by integrating tau.
template <class LogMarginal>
std::vector<double> enumerate_inclusion(int p, double a, double b, LogMarginal&& log_marginal) {
  const int models = 1 << p;
  std::vector<double> logw(static_cast<std::size_t>(models));
  double top = -1e300;
  for (int mask = 0; mask < models; ++mask) {
    int k = 0;
    for (int j = 0; j < p; ++j) k += (mask >> j) & 1;
    logw[static_cast<std::size_t>(mask)] = log_beta_fn(a + k, b + p - k) - log_beta_fn(a, b) + log_marginal(mask);
    top = std::max(top, logw[static_cast<std::size_t>(mask)]);
  }
  std::vector<double> incl(static_cast<std::size_t>(p), 0.0);
  double z = 0.0;
  for (int mask = 0; mask < models; ++mask) {
    const double w = std::exp(logw[static_cast<std::size_t>(mask)] - top);
    z += w;
    for (int j = 0; j < p; ++j) {
      if ((mask >> j) & 1) incl[static_cast<std::size_t>(j)] += w;
    }
  }
  for (double& v : incl) v /= z;
  return incl;
}

/// Marginal covariance of Y under fixed-variance linear regression with the
/// listed (column, prior variance) terms.
inline MatrixXd linear_marginal_cov(const std::vector<VectorXd>& cols, const std::vector<double>& vars, double s2) {
  const Eigen::Index n = cols.front().size();
  MatrixXd c = s2 * MatrixXd::Identity(n, n);
  for (std::size_t t = 0; t < cols.size(); ++t) c += vars[t] * cols[t] * cols[t].transpose();
  return c;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double var(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double sd(const std::vector<double>& v) { return std::sqrt(var(v)); }

/// Standard error of the sample mean.
inline double mc_se(const std::vector<double>& v) { return sd(v) / std::sqrt(static_cast<double>(v.size())); }

inline double chi2_sf(double x, double dof) {
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), x));
}

}  // namespace oracle
