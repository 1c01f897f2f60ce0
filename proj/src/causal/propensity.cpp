#include "bnpc/causal/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace bnpc {

namespace {

std::string row_key(std::span<const double> x) {
  std::string k(x.size() * sizeof(double), '\0');
  if (!x.empty()) std::memcpy(k.data(), x.data(), k.size());
  return k;
}

std::vector<double> row_of(const MatrixXd& x, Eigen::Index i) {
  std::vector<double> r(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index c = 0; c < x.cols(); ++c) r[static_cast<std::size_t>(c)] = x(i, c);
  return r;
}

double default_rho(const MatrixXd& x) {
  double v = 0.0;
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    const double m = x.col(c).mean();
    v += (x.col(c).array() - m).square().sum() / std::max<double>(1.0, static_cast<double>(x.rows() - 1));
  }
  v /= static_cast<double>(std::max<Eigen::Index>(1, x.cols()));
  return 1.0 / (static_cast<double>(std::max<Eigen::Index>(1, x.cols())) * std::max(v, 1e-12));
}

}  // namespace

BartConfig PropensityConfig::default_bart() {
  BartConfig c;
  c.n_trees = 50;
  c.burn_in = 250;
  c.n_draws = 250;
  return c;
}

void PropensityConfig::validate() const {
  bart.validate();
  if (gp_burn_in < 0 || gp_draws < 1) throw Error(ErrorKind::ConfigError, "GP probit needs burn_in >= 0 and draws >= 1");
  if (!(gp_sigma_g2 > 0.0)) throw Error(ErrorKind::ConfigError, "GP probit signal variance must be > 0");
  if (prediction_draws < 1) throw Error(ErrorKind::ConfigError, "prediction_draws must be >= 1");
}

double clamp_propensity(double e) { return std::clamp(e, 1e-12, 1.0 - 1e-12); }

void PropensityModel::finish() {
  row_index_.clear();
  for (Eigen::Index i = 0; i < train_x_.rows(); ++i) {
    row_index_.emplace(row_key(row_of(train_x_, i)), static_cast<std::size_t>(i));
  }
  if (method_ == PropensityMethod::GpProbit) {
    MatrixXd k = kernel_matrix(kernel_, train_x_, train_x_);
    k.diagonal().array() += 1.0;
    gp_factor_ = std::make_shared<const CholeskyFactor>(cholesky(k));
  }
}

double PropensityModel::predict(std::span<const double> x) const {
  if (static_cast<Eigen::Index>(x.size()) != train_x_.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "propensity query has the wrong number of covariates");
  }
  const auto it = row_index_.find(row_key(x));
  if (it != row_index_.end()) return e_hat_[it->second];
  return predict_new(x);
}

double PropensityModel::predict_new(std::span<const double> x) const {
  if (method_ == PropensityMethod::ProbitBart) {
    double s = 0.0;
    for (const auto& f : forests_) s += normal_cdf(f.eval(x));
    return clamp_propensity(s / static_cast<double>(forests_.size()));
  }
  // Probit of the Gaussian predictive for g(x).
  VectorXd kx(train_x_.rows());
  for (Eigen::Index i = 0; i < train_x_.rows(); ++i) kx(i) = kernel_eval(kernel_, x, row_of(train_x_, i));
  const double m = kx.dot(gp_alpha_);
  const double v = std::max(0.0, kernel_.sigma_g2 - kx.dot(gp_factor_->solve(kx)));
  return clamp_propensity(normal_cdf(m / std::sqrt(1.0 + v)));
}

std::vector<double> PropensityModel::predict_rows(const MatrixXd& x) const {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) out[static_cast<std::size_t>(i)] = predict(row_of(x, i));
  return out;
}

void PropensityModel::save(std::ostream& os) const {
  os << std::setprecision(17);
  os << "propensity " << (method_ == PropensityMethod::ProbitBart ? "probit_bart" : "gp_probit") << ' '
     << train_x_.rows() << ' ' << train_x_.cols() << '\n';
  for (double e : e_hat_) os << e << ' ';
  os << '\n';
  for (Eigen::Index i = 0; i < train_x_.rows(); ++i) {
    for (Eigen::Index c = 0; c < train_x_.cols(); ++c) os << train_x_(i, c) << ' ';
    os << '\n';
  }
  if (method_ == PropensityMethod::ProbitBart) {
    os << forests_.size() << '\n';
    for (const auto& f : forests_) write_forest(os, f);
  } else {
    os << kernel_.rho << ' ' << kernel_.sigma_g2 << '\n';
    for (Eigen::Index i = 0; i < gp_alpha_.size(); ++i) os << gp_alpha_(i) << ' ';
    os << '\n';
  }
}

PropensityModel PropensityModel::load(std::istream& is) {
  PropensityModel m;
  std::string tag;
  std::string method;
  Eigen::Index n = 0;
  Eigen::Index p = 0;
  if (!(is >> tag >> method >> n >> p) || tag != "propensity" || n < 1 || p < 0) {
    throw Error(ErrorKind::ParseError, "bad propensity header");
  }
  if (method == "probit_bart") {
    m.method_ = PropensityMethod::ProbitBart;
  } else if (method == "gp_probit") {
    m.method_ = PropensityMethod::GpProbit;
  } else {
    throw Error(ErrorKind::ParseError, "unknown propensity method " + method);
  }
  m.e_hat_.resize(static_cast<std::size_t>(n));
  for (auto& e : m.e_hat_) {
    if (!(is >> e)) throw Error(ErrorKind::ParseError, "truncated propensity estimates");
  }
  m.train_x_.resize(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < p; ++c) {
      if (!(is >> m.train_x_(i, c))) throw Error(ErrorKind::ParseError, "truncated propensity design");
    }
  }
  if (m.method_ == PropensityMethod::ProbitBart) {
    std::size_t nf = 0;
    if (!(is >> nf) || nf == 0) throw Error(ErrorKind::ParseError, "propensity store has no forests");
    for (std::size_t b = 0; b < nf; ++b) m.forests_.push_back(read_forest(is));
  } else {
    if (!(is >> m.kernel_.rho >> m.kernel_.sigma_g2)) throw Error(ErrorKind::ParseError, "bad GP kernel");
    m.gp_alpha_.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      if (!(is >> m.gp_alpha_(i))) throw Error(ErrorKind::ParseError, "truncated GP weights");
    }
  }
  m.finish();
  return m;
}

PropensityModel fit_propensity(const MatrixXd& x, const VectorXd& a, const PropensityConfig& config, RngStream& rng) {
  config.validate();
  if (a.size() != x.rows()) throw Error(ErrorKind::DimensionMismatch, "A and X lengths differ");
  if (x.array().isNaN().any()) throw Error(ErrorKind::MissingDataUnsupported, "propensity fit needs complete covariates");
  double n1 = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) != 0.0 && a(i) != 1.0) {
      throw Error(ErrorKind::NonBinaryTreatment, "row " + std::to_string(i + 1) + ": treatment must be 0 or 1");
    }
    n1 += a(i);
  }
  if (n1 == 0.0 || n1 == static_cast<double>(a.size())) {
    throw Error(ErrorKind::DegenerateData, "treatment is constant; the propensity is not estimable");
  }

  PropensityModel m;
  m.method_ = config.method;
  m.train_x_ = x;
  const auto n = static_cast<std::size_t>(x.rows());
  if (config.method == PropensityMethod::ProbitBart) {
    ProbitBartFit fit = fit_probit_bart(x, a, config.bart, rng);
    m.warnings_ = fit.warnings;
    m.e_hat_ = fit.train_prob();
    const std::size_t b = fit.draws.size();
    const std::size_t keep = std::min<std::size_t>(b, static_cast<std::size_t>(config.prediction_draws));
    for (std::size_t j = 0; j < keep; ++j) m.forests_.push_back(fit.draws[(j * b) / keep + (b / keep) - 1]);
  } else {
    if (x.rows() > kMaxGpObservations) {
      throw Error(ErrorKind::ConfigError, "GP probit supports at most " + std::to_string(kMaxGpObservations) + " rows");
    }
    m.kernel_ = KernelSpec{config.gp_rho > 0.0 ? config.gp_rho : default_rho(x), config.gp_sigma_g2};
    m.kernel_.validate();
    const MatrixXd k = kernel_matrix(m.kernel_, x, x);
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(k);
    const MatrixXd& v = eig.eigenvectors();
    const VectorXd lam = eig.eigenvalues().cwiseMax(0.0);
    const VectorXd shrink = lam.array() / (lam.array() + 1.0);
    const VectorXd sd = shrink.cwiseSqrt();
    VectorXd g = VectorXd::Zero(x.rows());
    VectorXd z(x.rows());
    VectorXd z_sum = VectorXd::Zero(x.rows());
    std::vector<double> e_sum(n, 0.0);
    const int total = config.gp_burn_in + config.gp_draws;
    for (int it = 0; it < total; ++it) {
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto side = a(i) > 0.5 ? TruncationSide::Right : TruncationSide::Left;
        z(i) = sample_truncated_normal(g(i), 1.0, side, 0.0, rng);
      }
      VectorXd eps(x.rows());
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps(i) = rng.normal();
      g = v * (shrink.cwiseProduct(v.transpose() * z) + sd.cwiseProduct(eps));
      if (it < config.gp_burn_in) continue;
      z_sum += z;
      for (std::size_t i = 0; i < n; ++i) e_sum[i] += normal_cdf(g(static_cast<Eigen::Index>(i)));
    }
    m.e_hat_.resize(n);
    for (std::size_t i = 0; i < n; ++i) m.e_hat_[i] = e_sum[i] / config.gp_draws;
    const VectorXd zbar = z_sum / config.gp_draws;
    m.gp_alpha_ = v * ((v.transpose() * zbar).array() / (lam.array() + 1.0)).matrix();
  }
  for (auto& e : m.e_hat_) e = clamp_propensity(e);
  m.finish();
  return m;
}

std::string OverlapReport::message() const {
  std::ostringstream os;
  os << n_violations() << " unit(s) with estimated propensity outside [" << epsilon << ", " << 1.0 - epsilon << "]";
  if (n_violations() > 0) os << " (" << below.size() << " below, " << above.size() << " above)";
  return os.str();
}

OverlapReport check_overlap(std::span<const double> e_hat, double epsilon) {
  OverlapReport r;
  r.epsilon = epsilon;
  for (std::size_t i = 0; i < e_hat.size(); ++i) {
    if (e_hat[i] < epsilon) r.below.push_back(static_cast<int>(i));
    if (e_hat[i] > 1.0 - epsilon) r.above.push_back(static_cast<int>(i));
  }
  return r;
}

}  // namespace bnpc
