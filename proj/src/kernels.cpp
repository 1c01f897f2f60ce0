#include "bnpc/kernels.hpp"

#include <cmath>

#include "bnpc/bart.hpp"

namespace bnpc::kernels {

namespace {

double sq_dist(const Eigen::MatrixXd& a, Eigen::Index i, const Eigen::MatrixXd& b, Eigen::Index j) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < a.cols(); ++c) {
    const double d = a(i, c) - b(j, c);
    s += d * d;
  }
  return s;
}

}  // namespace

Eigen::MatrixXd sq_exp_gram_serial(const Eigen::MatrixXd& x, double rho, double sigma_g2) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = sigma_g2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = sigma_g2 * std::exp(-rho * sq_dist(x, i, x, j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Eigen::MatrixXd sq_exp_gram_omp(const Eigen::MatrixXd& x, double rho, double sigma_g2) {
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd k(n, n);
#pragma omp parallel for schedule(dynamic, 16)
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = sigma_g2;
    for (Eigen::Index j = 0; j < i; ++j) {
      const double v = sigma_g2 * std::exp(-rho * sq_dist(x, i, x, j));
      k(i, j) = v;
      k(j, i) = v;
    }
  }
  return k;
}

Eigen::MatrixXd sq_exp_cross_serial(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double rho,
                                    double sigma_g2) {
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = sigma_g2 * std::exp(-rho * sq_dist(a, i, b, j));
  }
  return k;
}

Eigen::MatrixXd sq_exp_cross_omp(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double rho,
                                 double sigma_g2) {
  Eigen::MatrixXd k(a.rows(), b.rows());
#pragma omp parallel for schedule(static)
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < b.rows(); ++j) k(i, j) = sigma_g2 * std::exp(-rho * sq_dist(a, i, b, j));
  }
  return k;
}

std::vector<double> forest_predict_serial(std::span<const DecisionTree> trees, const Eigen::MatrixXd& x) {
  std::vector<double> out(static_cast<std::size_t>(x.rows()), 0.0);
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) row[static_cast<std::size_t>(c)] = x(i, c);
    double s = 0.0;
    for (const auto& t : trees) s += t.eval(row);
    out[static_cast<std::size_t>(i)] = s;
  }
  return out;
}

std::vector<double> forest_predict_omp(std::span<const DecisionTree> trees, const Eigen::MatrixXd& x) {
  std::vector<double> out(static_cast<std::size_t>(x.rows()), 0.0);
#pragma omp parallel
  {
    std::vector<double> row(static_cast<std::size_t>(x.cols()));
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      for (Eigen::Index c = 0; c < x.cols(); ++c) row[static_cast<std::size_t>(c)] = x(i, c);
      double s = 0.0;
      for (const auto& t : trees) s += t.eval(row);
      out[static_cast<std::size_t>(i)] = s;
    }
  }
  return out;
}

}  // namespace bnpc::kernels
