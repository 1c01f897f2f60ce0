#include "bnpc/causal/bcf.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>

namespace bnpc {

namespace {

double default_leaf_sd(double k, int n_trees) { return 0.5 / (k * std::sqrt(static_cast<double>(n_trees))); }

BartForest rescale(const std::vector<DecisionTree>& trees, double leaf_sd, double scale, double offset, double a_split,
                   double b_split, double noise_sd) {
  BartForest f;
  f.trees = trees;
  const double shift = offset / static_cast<double>(trees.size());
  for (auto& t : f.trees) {
    for (int k = 0; k < t.capacity(); ++k) {
      if (t.node(k).is_leaf()) t.node(k).value = scale * t.node(k).value + shift;
    }
  }
  f.leaf_sd = scale * leaf_sd;
  f.noise_sd = noise_sd;
  f.a_split = a_split;
  f.b_split = b_split;
  return f;
}

MatrixXd mu_design(const MatrixXd& x, std::span<const double> e_hat, bool include) {
  if (!include) return x;
  MatrixXd d(x.rows(), x.cols() + 1);
  d.leftCols(x.cols()) = x;
  for (Eigen::Index i = 0; i < x.rows(); ++i) d(i, x.cols()) = clamp_propensity(e_hat[static_cast<std::size_t>(i)]);
  return d;
}

std::vector<int> treated_rows(const VectorXd& a) {
  std::vector<int> t;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) == 1.0) t.push_back(static_cast<int>(i));
  }
  return t;
}

MatrixXd select_rows(const MatrixXd& x, const std::vector<int>& idx) {
  MatrixXd out(static_cast<Eigen::Index>(idx.size()), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = x.row(idx[r]);
  return out;
}

const MatrixXd& checked_inputs(const MatrixXd& x, const VectorXd& a, const VectorXd& y, std::span<const double> e_hat,
                               const BcfConfig& config) {
  config.validate();
  if (a.size() != x.rows() || y.size() != x.rows()) throw Error(ErrorKind::DimensionMismatch, "Y, A and X lengths differ");
  if (config.include_propensity && static_cast<Eigen::Index>(e_hat.size()) != x.rows()) {
    throw Error(ErrorKind::DimensionMismatch, "propensity estimates do not match the data");
  }
  if (x.array().isNaN().any()) throw Error(ErrorKind::MissingDataUnsupported, "BCF needs complete covariates");
  if (y.size() < 10) throw Error(ErrorKind::InvalidParameter, "BCF needs at least 10 observations");
  int n1 = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    if (a(i) != 0.0 && a(i) != 1.0) {
      throw Error(ErrorKind::NonBinaryTreatment, "row " + std::to_string(i + 1) + ": treatment must be 0 or 1");
    }
    n1 += a(i) == 1.0 ? 1 : 0;
  }
  if (n1 == 0 || n1 == a.size()) throw Error(ErrorKind::DegenerateData, "both treatment arms must be observed");
  return x;
}

}  // namespace

BcfConfig BcfConfig::symmetric() {
  BcfConfig c;
  c.tau_trees = c.mu_trees;
  c.tau_a = c.mu_a;
  c.tau_b = c.mu_b;
  c.tau_leaf_scale = 1.0;
  return c;
}

void BcfConfig::validate() const {
  if (mu_trees < 1 || tau_trees < 1 || burn_in < 0 || n_draws < 1 || thin < 1) {
    throw Error(ErrorKind::ConfigError, "BCF needs positive tree counts, burn_in >= 0, n_draws >= 1, thin >= 1");
  }
  if (!(mu_a > 0.0 && mu_a < 1.0) || !(tau_a > 0.0 && tau_a < 1.0) || !(mu_b >= 0.0) || !(tau_b >= 0.0)) {
    throw Error(ErrorKind::ConfigError, "BCF tree priors need 0 < a < 1 and b >= 0");
  }
  if (!(k > 0.0) || !(tau_leaf_scale > 0.0)) throw Error(ErrorKind::ConfigError, "BCF leaf scales must be > 0");
  if (!(sigma_nu > 0.0) || !(sigma_quantile > 0.0 && sigma_quantile < 1.0)) {
    throw Error(ErrorKind::ConfigError, "invalid noise prior settings");
  }
}

BcfChain::BcfChain(const MatrixXd& x, const VectorXd& a, const VectorXd& y, std::span<const double> e_hat,
                   const BcfConfig& config)
    : config_(config),
      a_(a),
      treated_(treated_rows(a)),
      mu_(mu_design(checked_inputs(x, a, y, e_hat, config), e_hat, config.include_propensity), config.mu_trees,
          default_leaf_sd(config.k, config.mu_trees), config.mu_a, config.mu_b),
      tau_(select_rows(x, treated_), config.tau_trees, default_leaf_sd(config.k, config.tau_trees) * config.tau_leaf_scale,
           config.tau_a, config.tau_b) {
  const double lo = y.minCoeff();
  const double hi = y.maxCoeff();
  y_scale_ = hi > lo ? hi - lo : 1.0;
  y_offset_ = lo + 0.5 * (hi - lo);
  y_ = (y.array() - y_offset_) / y_scale_;
  MatrixXd xa(x.rows(), x.cols() + 1);
  xa.leftCols(x.cols()) = x;
  xa.col(x.cols()) = a;
  const double sigma_hat = std::max(ols_residual_sd(xa, y_), 1e-3);
  lambda_ = sigma_prior_scale(sigma_hat, config.sigma_nu, config.sigma_quantile);
  sigma0_ = sigma1_ = sigma_hat;
  target_mu_.assign(static_cast<std::size_t>(y.size()), 0.0);
  target_tau_.assign(treated_.size(), 0.0);
}

void BcfChain::refresh_weights() {
  std::vector<double> w(static_cast<std::size_t>(a_.size()));
  for (Eigen::Index i = 0; i < a_.size(); ++i) {
    const double s = a_(i) == 1.0 ? sigma1_ : sigma0_;
    w[static_cast<std::size_t>(i)] = 1.0 / (s * s);
  }
  mu_.set_weights(std::move(w));
}

void BcfChain::step(RngStream& rng) {
  const auto tau_fit = tau_.fit();
  for (std::size_t i = 0; i < target_mu_.size(); ++i) target_mu_[i] = y_(static_cast<Eigen::Index>(i));
  for (std::size_t t = 0; t < treated_.size(); ++t) target_mu_[static_cast<std::size_t>(treated_[t])] -= tau_fit[t];
  if (config_.arm_noise) {
    refresh_weights();
    mu_.sweep(target_mu_, 1.0, rng);
  } else {
    mu_.sweep(target_mu_, sigma0_, rng);
  }
  const auto mu_fit = mu_.fit();
  for (std::size_t t = 0; t < treated_.size(); ++t) {
    const auto i = static_cast<std::size_t>(treated_[t]);
    target_tau_[t] = y_(static_cast<Eigen::Index>(i)) - mu_fit[i];
  }
  tau_.sweep(target_tau_, config_.arm_noise ? sigma1_ : sigma0_, rng);
  update_noise(rng);
}

void BcfChain::update_noise(RngStream& rng) {
  const auto mu_fit = mu_.fit();
  const auto tau_fit = tau_.fit();
  std::vector<double> resid(mu_fit.size());
  for (std::size_t i = 0; i < resid.size(); ++i) resid[i] = y_(static_cast<Eigen::Index>(i)) - mu_fit[i];
  for (std::size_t t = 0; t < treated_.size(); ++t) resid[static_cast<std::size_t>(treated_[t])] -= tau_fit[t];
  const double nu = config_.sigma_nu;
  if (!config_.arm_noise) {
    double sse = 0.0;
    for (double r : resid) sse += r * r;
    const double s2 = (nu * lambda_ + sse) / sample_chi_squared(nu + static_cast<double>(resid.size()), rng);
    sigma0_ = sigma1_ = std::sqrt(std::max(s2, 1e-300));
    return;
  }
  double sse0 = 0.0, sse1 = 0.0, n0 = 0.0, n1 = 0.0;
  for (std::size_t i = 0; i < resid.size(); ++i) {
    if (a_(static_cast<Eigen::Index>(i)) == 1.0) {
      sse1 += resid[i] * resid[i];
      n1 += 1.0;
    } else {
      sse0 += resid[i] * resid[i];
      n0 += 1.0;
    }
  }
  sigma0_ = std::sqrt(std::max((nu * lambda_ + sse0) / sample_chi_squared(nu + n0, rng), 1e-300));
  sigma1_ = std::sqrt(std::max((nu * lambda_ + sse1) / sample_chi_squared(nu + n1, rng), 1e-300));
}

BcfDraw BcfChain::current() const {
  BcfDraw d;
  d.sigma0 = sigma0_ * y_scale_;
  d.sigma1 = sigma1_ * y_scale_;
  d.mu = rescale(mu_.compact_trees(), mu_.leaf_sd(), y_scale_, y_offset_, config_.mu_a, config_.mu_b, d.sigma0);
  d.tau = rescale(tau_.compact_trees(), tau_.leaf_sd(), y_scale_, 0.0, config_.tau_a, config_.tau_b, d.sigma1);
  return d;
}

void BcfChain::save(std::ostream& os) const {
  os << std::setprecision(17) << "bcf " << sigma0_ << ' ' << sigma1_ << '\n';
  mu_.save(os);
  tau_.save(os);
}

void BcfChain::load(std::istream& is) {
  std::string tag;
  if (!(is >> tag >> sigma0_ >> sigma1_) || tag != "bcf") throw Error(ErrorKind::ParseError, "bad BCF checkpoint");
  mu_.load(is);
  tau_.load(is);
}

BcfFit::BcfFit(std::vector<BcfDraw> draws, std::shared_ptr<const PropensityModel> prop, bool include_propensity, int p)
    : draws_(std::move(draws)), prop_(std::move(prop)), include_propensity_(include_propensity), p_(p) {
  if (include_propensity_ && !prop_) throw Error(ErrorKind::ConfigError, "BCF with a propensity column needs the propensity model");
}

double BcfFit::mean(std::size_t b, double a, std::span<const double> x) const {
  const BcfDraw& d = draws_[b];
  double mu = 0.0;
  if (include_propensity_) {
    std::vector<double> row(x.begin(), x.end());
    row.push_back(clamp_propensity(prop_->predict(x)));
    mu = d.mu.eval(row);
  } else {
    mu = d.mu.eval(x);
  }
  return mu + a * d.tau.eval(x);
}

double BcfFit::noise_sd(std::size_t b, double a) const { return a == 1.0 ? draws_[b].sigma1 : draws_[b].sigma0; }

double BcfFit::effect(std::size_t b, std::span<const double> x) const { return draws_[b].tau.eval(x); }

BcfFit fit_bcf(const Dataset& data, std::shared_ptr<const PropensityModel> prop, const BcfConfig& config,
               RngStream& rng) {
  data.validate();
  std::vector<double> e_hat;
  if (config.include_propensity) {
    if (!prop) throw Error(ErrorKind::ConfigError, "BCF with a propensity column needs a fitted propensity model");
    e_hat = prop->e_hat();
  }
  BcfChain chain(data.x, data.a, data.y, e_hat, config);
  std::vector<BcfDraw> draws;
  const int total = config.burn_in + config.n_draws * config.thin;
  for (int it = 0; it < total; ++it) {
    chain.step(rng);
    if (it >= config.burn_in && (it - config.burn_in) % config.thin == 0) draws.push_back(chain.current());
  }
  return BcfFit(std::move(draws), std::move(prop), config.include_propensity, static_cast<int>(data.p()));
}

BartOutcome::BartOutcome(std::vector<BartForest> draws, std::vector<double> sigma,
                         std::shared_ptr<const PropensityModel> prop, int p)
    : draws_(std::move(draws)), sigma_(std::move(sigma)), prop_(std::move(prop)), p_(p) {
  if (draws_.size() != sigma_.size()) throw Error(ErrorKind::DimensionMismatch, "forest and noise draw counts differ");
}

double BartOutcome::mean(std::size_t b, double a, std::span<const double> x) const {
  std::vector<double> row;
  row.reserve(x.size() + 2);
  row.push_back(a);
  row.insert(row.end(), x.begin(), x.end());
  if (prop_) row.push_back(clamp_propensity(prop_->predict(x)));
  return draws_[b].eval(row);
}

MatrixXd bart_outcome_design(const VectorXd& a, const MatrixXd& x, const PropensityModel* prop) {
  const Eigen::Index extra = prop ? 1 : 0;
  MatrixXd d(x.rows(), x.cols() + 1 + extra);
  d.col(0) = a;
  d.middleCols(1, x.cols()) = x;
  if (prop) {
    if (static_cast<Eigen::Index>(prop->e_hat().size()) != x.rows()) {
      throw Error(ErrorKind::DimensionMismatch, "propensity estimates do not match the data");
    }
    for (Eigen::Index i = 0; i < x.rows(); ++i) d(i, x.cols() + 1) = clamp_propensity(prop->e_hat()[static_cast<std::size_t>(i)]);
  }
  return d;
}

BartOutcome fit_bart_outcome(const Dataset& data, std::shared_ptr<const PropensityModel> prop,
                             const BartConfig& config, RngStream& rng) {
  data.validate();
  if (data.has_missing()) throw Error(ErrorKind::MissingDataUnsupported, "BART outcome model needs complete covariates");
  BartConfig c = config;
  c.keep_forests = true;
  BartFit fit = fit_bart(bart_outcome_design(data.a, data.x, prop.get()), data.y, c, rng);
  return BartOutcome(std::move(fit.draws), std::move(fit.sigma), std::move(prop), static_cast<int>(data.p()));
}

}  // namespace bnpc
