#include "bnpc/sparse_linear.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace bnpc {

namespace {

double sample_var(const VectorXd& v) {
  if (v.size() < 2) return 0.0;
  return (v.array() - v.mean()).square().sum() / static_cast<double>(v.size() - 1);
}

double noise_prior_scale(double base, const VectorXd& y) { return base * std::max(sample_var(y), 1e-8); }

bool bernoulli_logit(double logit, RngStream& rng) {
  if (logit == std::numeric_limits<double>::infinity()) return true;
  if (logit == -std::numeric_limits<double>::infinity()) return false;
  const double p = 1.0 / (1.0 + std::exp(-logit));
  return rng.uniform() < p;
}

double log_odds(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return std::log(p) - std::log1p(-p);
}

// Draw from Normal(Q^{-1} b, Q^{-1}).
VectorXd draw_from_precision(const MatrixXd& q, const VectorXd& b, RngStream& rng) {
  const CholeskyFactor f = cholesky(q);
  const VectorXd mean = f.solve(b);
  VectorXd z(b.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
  return mean + f.llt.matrixU().solve(z);
}

// Linear Gaussian regression y = D b + noise that keeps the residual
// r = y - D b up to date under coordinate and block updates.
class RegressionBlock {
 public:
  RegressionBlock(MatrixXd d, VectorXd y) : d_(std::move(d)), y_(std::move(y)) {
    b_ = VectorXd::Zero(d_.cols());
    col_sq_ = d_.colwise().squaredNorm().transpose();
    r_ = y_;
  }

  Eigen::Index n_cols() const { return d_.cols(); }
  const VectorXd& coef() const { return b_; }
  double coef(Eigen::Index c) const { return b_(c); }
  const VectorXd& target() const { return y_; }
  const VectorXd& resid() const { return r_; }
  VectorXd fitted() const { return y_ - r_; }
  double sse() const { return r_.squaredNorm(); }

  void set_target(VectorXd y) {
    r_ += y - y_;
    y_ = std::move(y);
  }

  void set_column(Eigen::Index c, const VectorXd& v) {
    r_ += d_.col(c) * b_(c);
    d_.col(c) = v;
    col_sq_(c) = v.squaredNorm();
    r_ -= d_.col(c) * b_(c);
  }

  // d_c' (r + d_c b_c): the projection with coefficient c removed.
  double partial_xr(Eigen::Index c) const { return d_.col(c).dot(r_) + col_sq_(c) * b_(c); }

  // log Bayes factor of including column c with a Normal(0, slab) coefficient.
  double log_bf(Eigen::Index c, double s2, double slab) const {
    const double xx = col_sq_(c);
    const double xr = partial_xr(c);
    return -0.5 * std::log1p(slab * xx / s2) + 0.5 * xr * xr * slab / (s2 * (s2 + slab * xx));
  }

  void set_coef(Eigen::Index c, double v) {
    r_ -= d_.col(c) * (v - b_(c));
    b_(c) = v;
  }

  void draw_coef(Eigen::Index c, double s2, double prior_var, RngStream& rng) {
    const double prec = col_sq_(c) / s2 + 1.0 / prior_var;
    const double m = partial_xr(c) / s2 / prec;
    set_coef(c, m + rng.normal() / std::sqrt(prec));
  }

  // Joint conjugate draw of the listed coefficients given the others.
  void block_draw(const std::vector<Eigen::Index>& cols, const std::vector<double>& prior_var, double s2,
                  RngStream& rng) {
    if (cols.empty()) return;
    const auto k = static_cast<Eigen::Index>(cols.size());
    MatrixXd sub(d_.rows(), k);
    VectorXd partial = r_;
    for (Eigen::Index j = 0; j < k; ++j) {
      sub.col(j) = d_.col(cols[static_cast<std::size_t>(j)]);
      partial += sub.col(j) * b_(cols[static_cast<std::size_t>(j)]);
    }
    MatrixXd q = sub.transpose() * sub / s2;
    for (Eigen::Index j = 0; j < k; ++j) q(j, j) += 1.0 / prior_var[static_cast<std::size_t>(j)];
    const VectorXd bvec = sub.transpose() * partial / s2;
    const VectorXd draw = draw_from_precision(q, bvec, rng);
    for (Eigen::Index j = 0; j < k; ++j) b_(cols[static_cast<std::size_t>(j)]) = draw(j);
    r_ = partial - sub * draw;
  }

  void refresh_resid() { r_ = y_ - d_ * b_; }

 private:
  MatrixXd d_;
  VectorXd y_;
  VectorXd b_;
  VectorXd col_sq_;
  VectorXd r_;
};

MatrixXd with_intercept(const MatrixXd& x) {
  MatrixXd d(x.rows(), x.cols() + 1);
  d.col(0).setOnes();
  d.rightCols(x.cols()) = x;
  return d;
}

void check_common(int burn_in, int n_draws, int thin) {
  if (burn_in < 0 || n_draws < 1 || thin < 1) {
    throw Error(ErrorKind::ConfigError, "need burn_in >= 0, n_draws >= 1, thin >= 1");
  }
}

bool keep_iteration(int it, int burn_in, int thin) { return it >= burn_in && (it - burn_in) % thin == 0; }

}  // namespace

void SpikeSlabConfig::validate() const {
  check_common(burn_in, n_draws, thin);
  if (!(tau_a > 0.0) || !(tau_b > 0.0) || !(slab_shape > 0.0) || !(slab_scale > 0.0) || !(noise_shape > 0.0) ||
      !(noise_scale > 0.0) || !(intercept_var > 0.0)) {
    throw Error(ErrorKind::ConfigError, "spike-and-slab hyperparameters must be positive");
  }
  if (fixed_tau && !(*fixed_tau >= 0.0 && *fixed_tau <= 1.0)) throw Error(ErrorKind::ConfigError, "tau must lie in [0, 1]");
  if (fixed_slab_var && !(*fixed_slab_var > 0.0)) throw Error(ErrorKind::ConfigError, "slab variance must be > 0");
  if (fixed_noise_var && !(*fixed_noise_var > 0.0)) throw Error(ErrorKind::ConfigError, "noise variance must be > 0");
  if (n_forced < 0) throw Error(ErrorKind::ConfigError, "n_forced must be >= 0");
}

VectorXd SpikeSlabFit::inclusion_prob() const {
  if (draws.empty()) return {};
  VectorXd p = VectorXd::Zero(static_cast<Eigen::Index>(draws.front().gamma.size()));
  for (const auto& d : draws) {
    for (std::size_t j = 0; j < d.gamma.size(); ++j) p(static_cast<Eigen::Index>(j)) += d.gamma[j];
  }
  return p / static_cast<double>(draws.size());
}

VectorXd SpikeSlabFit::treatment_inclusion_prob() const {
  if (draws.empty() || draws.front().gamma_a.empty()) return inclusion_prob();
  VectorXd p = VectorXd::Zero(static_cast<Eigen::Index>(draws.front().gamma_a.size()));
  for (const auto& d : draws) {
    for (std::size_t j = 0; j < d.gamma_a.size(); ++j) p(static_cast<Eigen::Index>(j)) += d.gamma_a[j];
  }
  return p / static_cast<double>(draws.size());
}

VectorXd SpikeSlabFit::beta_mean() const {
  if (draws.empty()) return {};
  VectorXd m = VectorXd::Zero(draws.front().beta.size());
  for (const auto& d : draws) m += d.beta;
  return m / static_cast<double>(draws.size());
}

SpikeSlabFit spike_slab_gibbs(const MatrixXd& x, const VectorXd& y, const SpikeSlabConfig& config, RngStream& rng) {
  config.validate();
  const Eigen::Index n = x.rows();
  if (n < 2 || x.cols() < 1) throw Error(ErrorKind::ConfigError, "spike-and-slab needs N >= 2 and P >= 1");
  if (y.size() != n) throw Error(ErrorKind::DimensionMismatch, "X and Y lengths differ");
  if (config.n_forced > x.cols()) throw Error(ErrorKind::ConfigError, "n_forced exceeds the column count");
  const Eigen::Index n_fixed = 1 + config.n_forced;
  const Eigen::Index p = x.cols() - config.n_forced;

  RegressionBlock block(with_intercept(x), y);
  std::vector<char> gamma(static_cast<std::size_t>(p), 0);
  double tau = config.fixed_tau.value_or(0.5);
  double slab = config.fixed_slab_var.value_or(config.slab_scale);
  double s2 = config.fixed_noise_var.value_or(std::max(sample_var(y), 1e-8));
  const double noise_scale = noise_prior_scale(config.noise_scale, y);

  SpikeSlabFit fit;
  const int total = config.burn_in + config.n_draws * config.thin;
  for (int it = 0; it < total; ++it) {
    const double prior_logit = log_odds(tau);
    for (Eigen::Index j = 0; j < p; ++j) {
      const Eigen::Index c = n_fixed + j;
      const bool in = bernoulli_logit(prior_logit + block.log_bf(c, s2, slab), rng);
      gamma[static_cast<std::size_t>(j)] = in ? 1 : 0;
      if (in) {
        block.draw_coef(c, s2, slab, rng);
      } else {
        block.set_coef(c, 0.0);
      }
    }
    std::vector<Eigen::Index> cols;
    std::vector<double> vars;
    for (Eigen::Index c = 0; c < n_fixed; ++c) {
      cols.push_back(c);
      vars.push_back(config.intercept_var);
    }
    double k = 0.0;
    double ss = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!gamma[static_cast<std::size_t>(j)]) continue;
      cols.push_back(n_fixed + j);
      vars.push_back(slab);
    }
    block.block_draw(cols, vars, s2, rng);
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!gamma[static_cast<std::size_t>(j)]) continue;
      k += 1.0;
      ss += block.coef(n_fixed + j) * block.coef(n_fixed + j);
    }
    if (!config.fixed_tau) tau = sample_beta(config.tau_a + k, config.tau_b + static_cast<double>(p) - k, rng);
    if (!config.fixed_slab_var) slab = sample_inverse_gamma(config.slab_shape + 0.5 * k, config.slab_scale + 0.5 * ss, rng);
    if (!config.fixed_noise_var) {
      s2 = sample_inverse_gamma(config.noise_shape + 0.5 * static_cast<double>(n), noise_scale + 0.5 * block.sse(), rng);
    }
    if (!keep_iteration(it, config.burn_in, config.thin)) continue;
    SpikeSlabState st;
    st.intercept = block.coef(0);
    st.forced = block.coef().segment(1, config.n_forced);
    st.beta = block.coef().tail(p);
    st.gamma = gamma;
    st.tau = tau;
    st.slab_var = slab;
    st.noise_var = s2;
    fit.draws.push_back(std::move(st));
  }
  return fit;
}

double linked_prior_odds(bool gamma_a, double varpi) {
  if (!(varpi >= 1.0) || !std::isfinite(varpi)) throw Error(ErrorKind::InvalidParameter, "varpi must be >= 1");
  return gamma_a ? varpi / (1.0 + varpi) : 0.5;
}

void SharedSpikeSlabConfig::validate() const {
  base.validate();
  if (selection == Selection::Linked && !(varpi >= 1.0)) throw Error(ErrorKind::ConfigError, "varpi must be >= 1");
  if (links.outcome != Link::Identity) throw Error(ErrorKind::ConfigError, "only the identity outcome link is supported");
  if (!(treatment_slab_shape > 0.0) || !(treatment_slab_scale > 0.0)) {
    throw Error(ErrorKind::ConfigError, "treatment slab hyperparameters must be positive");
  }
  if (fixed_treatment_slab_var && !(*fixed_treatment_slab_var > 0.0)) {
    throw Error(ErrorKind::ConfigError, "treatment slab variance must be > 0");
  }
  if (fixed_treatment_noise_var && !(*fixed_treatment_noise_var > 0.0)) {
    throw Error(ErrorKind::ConfigError, "treatment noise variance must be > 0");
  }
  if (base.n_forced != 0) throw Error(ErrorKind::ConfigError, "n_forced is not used by the joint model");
}

namespace {

class TreatmentModel {
 public:
  TreatmentModel(const MatrixXd& x, const VectorXd& a, const SharedSpikeSlabConfig& cfg, RngStream& rng)
      : cfg_(cfg), a_(a), block_(with_intercept(x), a) {
    probit_ = cfg.links.treatment == Link::Probit;
    if (probit_) {
      for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i) != 0.0 && a(i) != 1.0) {
          throw Error(ErrorKind::NonBinaryTreatment, "row " + std::to_string(i) + ": treatment must be 0/1 for the probit link");
        }
      }
      s2_ = 1.0;
      update_latent(rng);
    } else {
      s2_ = cfg.fixed_treatment_noise_var.value_or(std::max(sample_var(a), 1e-8));
    }
    slab_ = cfg.fixed_treatment_slab_var.value_or(cfg.treatment_slab_scale);
    noise_scale_ = noise_prior_scale(cfg.base.noise_scale, a);
  }

  RegressionBlock& block() { return block_; }
  const RegressionBlock& block() const { return block_; }
  double s2() const { return s2_; }
  double slab() const { return slab_; }

  void update_latent(RngStream& rng) {
    if (!probit_) return;
    const VectorXd mean = block_.fitted();
    VectorXd z(a_.size());
    for (Eigen::Index i = 0; i < a_.size(); ++i) {
      const auto side = a_(i) > 0.5 ? TruncationSide::Right : TruncationSide::Left;
      z(i) = sample_truncated_normal(mean(i), 1.0, side, 0.0, rng);
    }
    block_.set_target(std::move(z));
  }

  void finish_sweep(const std::vector<char>& incl, RngStream& rng) {
    std::vector<Eigen::Index> cols{0};
    std::vector<double> vars{cfg_.base.intercept_var};
    for (std::size_t j = 0; j < incl.size(); ++j) {
      if (!incl[j]) continue;
      cols.push_back(static_cast<Eigen::Index>(j) + 1);
      vars.push_back(slab_);
    }
    block_.block_draw(cols, vars, s2_, rng);
    double k = 0.0;
    double ss = 0.0;
    for (std::size_t j = 0; j < incl.size(); ++j) {
      if (!incl[j]) continue;
      k += 1.0;
      ss += block_.coef(static_cast<Eigen::Index>(j) + 1) * block_.coef(static_cast<Eigen::Index>(j) + 1);
    }
    if (!cfg_.fixed_treatment_slab_var) {
      slab_ = sample_inverse_gamma(cfg_.treatment_slab_shape + 0.5 * k, cfg_.treatment_slab_scale + 0.5 * ss, rng);
    }
    if (!probit_ && !cfg_.fixed_treatment_noise_var) {
      s2_ = sample_inverse_gamma(cfg_.base.noise_shape + 0.5 * static_cast<double>(a_.size()),
                                 noise_scale_ + 0.5 * block_.sse(), rng);
    }
  }

 private:
  SharedSpikeSlabConfig cfg_;
  VectorXd a_;
  RegressionBlock block_;
  bool probit_ = true;
  double s2_ = 1.0;
  double slab_ = 1.0;
  double noise_scale_ = 1.0;
};

VectorXd prefit_linear_predictor(const MatrixXd& x, const VectorXd& a, const SharedSpikeSlabConfig& cfg, RngStream& rng) {
  TreatmentModel tm(x, a, cfg, rng);
  const Eigen::Index p = x.cols();
  std::vector<char> incl(static_cast<std::size_t>(p), 0);
  double tau = cfg.base.fixed_tau.value_or(0.5);
  VectorXd coef_sum = VectorXd::Zero(p + 1);
  int kept = 0;
  const int total = cfg.base.burn_in + cfg.base.n_draws * cfg.base.thin;
  for (int it = 0; it < total; ++it) {
    tm.update_latent(rng);
    const double prior_logit = log_odds(tau);
    for (Eigen::Index j = 0; j < p; ++j) {
      const bool in = bernoulli_logit(prior_logit + tm.block().log_bf(j + 1, tm.s2(), tm.slab()), rng);
      incl[static_cast<std::size_t>(j)] = in ? 1 : 0;
      if (in) {
        tm.block().draw_coef(j + 1, tm.s2(), tm.slab(), rng);
      } else {
        tm.block().set_coef(j + 1, 0.0);
      }
    }
    tm.finish_sweep(incl, rng);
    double k = 0.0;
    for (char g : incl) k += g;
    if (!cfg.base.fixed_tau) tau = sample_beta(cfg.base.tau_a + k, cfg.base.tau_b + static_cast<double>(p) - k, rng);
    if (keep_iteration(it, cfg.base.burn_in, cfg.base.thin)) {
      coef_sum += tm.block().coef();
      ++kept;
    }
  }
  const VectorXd coef = coef_sum / kept;
  return with_intercept(x) * coef;
}

}  // namespace

SpikeSlabFit shared_spike_slab_gibbs(const MatrixXd& x, const VectorXd& a, const VectorXd& y,
                                     const SharedSpikeSlabConfig& config, RngStream& rng) {
  config.validate();
  const SpikeSlabConfig& base = config.base;
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 2 || p < 1) throw Error(ErrorKind::ConfigError, "joint spike-and-slab needs N >= 2 and P >= 1");
  if (a.size() != n || y.size() != n) throw Error(ErrorKind::DimensionMismatch, "X, A and Y lengths differ");

  VectorXd eta = VectorXd::Zero(n);
  const bool refresh = config.propensity_term && config.propensity_mode == PropensityMode::Refresh;
  if (config.propensity_term && config.propensity_mode == PropensityMode::Prefit) {
    RngStream pre = rng.split(0x9e3779b97f4a7c15ULL);
    eta = prefit_linear_predictor(x, a, config, pre);
  }

  TreatmentModel tm(x, a, config, rng);
  if (refresh) eta = tm.block().fitted();

  // Outcome design: [1, A, eta?, X].
  const Eigen::Index n_fixed = config.propensity_term ? 3 : 2;
  MatrixXd d(n, n_fixed + p);
  d.col(0).setOnes();
  d.col(1) = a;
  if (config.propensity_term) d.col(2) = eta;
  d.rightCols(p) = x;
  RegressionBlock out(std::move(d), y);

  std::vector<char> gamma(static_cast<std::size_t>(p), 0);
  std::vector<char> gamma_a(static_cast<std::size_t>(p), 0);
  double tau = base.fixed_tau.value_or(0.5);
  double slab = base.fixed_slab_var.value_or(base.slab_scale);
  double s2 = base.fixed_noise_var.value_or(std::max(sample_var(y), 1e-8));
  const double noise_scale = noise_prior_scale(base.noise_scale, y);
  const bool shared = config.selection == Selection::Shared;

  SpikeSlabFit fit;
  const int total = base.burn_in + base.n_draws * base.thin;
  for (int it = 0; it < total; ++it) {
    tm.update_latent(rng);
    const double prior_logit = log_odds(tau);
    for (Eigen::Index j = 0; j < p; ++j) {
      const auto js = static_cast<std::size_t>(j);
      const Eigen::Index cy = n_fixed + j;
      const Eigen::Index ca = 1 + j;
      const double bf_y = out.log_bf(cy, s2, slab);
      const double bf_a = tm.block().log_bf(ca, tm.s2(), tm.slab());
      bool in_a = false;
      bool in_y = false;
      if (shared) {
        in_a = in_y = bernoulli_logit(prior_logit + bf_y + bf_a, rng);
      } else {
        // gamma_a given gamma_y, then gamma_y given gamma_a.
        const bool gy = gamma[js] != 0;
        const double py1 = linked_prior_odds(true, config.varpi);
        const double py0 = linked_prior_odds(false, config.varpi);
        const double link_term = gy ? std::log(py1) - std::log(py0) : std::log1p(-py1) - std::log1p(-py0);
        in_a = bernoulli_logit(prior_logit + bf_a + link_term, rng);
        in_y = bernoulli_logit(log_odds(linked_prior_odds(in_a, config.varpi)) + bf_y, rng);
      }
      gamma[js] = in_y ? 1 : 0;
      gamma_a[js] = in_a ? 1 : 0;
      if (in_y) {
        out.draw_coef(cy, s2, slab, rng);
      } else {
        out.set_coef(cy, 0.0);
      }
      if (in_a) {
        tm.block().draw_coef(ca, tm.s2(), tm.slab(), rng);
      } else {
        tm.block().set_coef(ca, 0.0);
      }
    }
    tm.finish_sweep(gamma_a, rng);
    if (refresh) {
      eta = tm.block().fitted();
      out.set_column(2, eta);
    }

    std::vector<Eigen::Index> cols;
    std::vector<double> vars;
    for (Eigen::Index c = 0; c < n_fixed; ++c) {
      cols.push_back(c);
      vars.push_back(base.intercept_var);
    }
    for (Eigen::Index j = 0; j < p; ++j) {
      if (!gamma[static_cast<std::size_t>(j)]) continue;
      cols.push_back(n_fixed + j);
      vars.push_back(slab);
    }
    out.block_draw(cols, vars, s2, rng);
    double k = 0.0;
    double ss = 0.0;
    double k_sel = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      k_sel += gamma_a[static_cast<std::size_t>(j)];
      if (!gamma[static_cast<std::size_t>(j)]) continue;
      k += 1.0;
      ss += out.coef(n_fixed + j) * out.coef(n_fixed + j);
    }
    if (!base.fixed_tau) tau = sample_beta(base.tau_a + k_sel, base.tau_b + static_cast<double>(p) - k_sel, rng);
    if (!base.fixed_slab_var) slab = sample_inverse_gamma(base.slab_shape + 0.5 * k, base.slab_scale + 0.5 * ss, rng);
    if (!base.fixed_noise_var) {
      s2 = sample_inverse_gamma(base.noise_shape + 0.5 * static_cast<double>(n), noise_scale + 0.5 * out.sse(), rng);
    }
    if (!keep_iteration(it, base.burn_in, base.thin)) continue;
    SpikeSlabState st;
    st.intercept = out.coef(0);
    st.beta_a = out.coef(1);
    st.beta_e = config.propensity_term ? out.coef(2) : 0.0;
    st.beta = out.coef().tail(p);
    st.gamma = gamma;
    if (!shared) st.gamma_a = gamma_a;
    st.alpha0 = tm.block().coef(0);
    st.alpha = tm.block().coef().tail(p);
    if (config.propensity_term && !refresh) {
      // Prefit: eta is fixed; express it through the stored alpha fields so
      // that eta(x) = alpha0 + x'alpha reproduces the training column.
      const MatrixXd dx = with_intercept(x);
      const VectorXd c = dx.colPivHouseholderQr().solve(eta);
      st.alpha0 = c(0);
      st.alpha = c.tail(p);
    }
    st.tau = tau;
    st.slab_var = slab;
    st.slab_var_a = tm.slab();
    st.noise_var = s2;
    st.treatment_noise_var = tm.s2();
    fit.draws.push_back(std::move(st));
  }
  return fit;
}

void HorseshoeConfig::validate() const {
  check_common(burn_in, n_draws, thin);
  if (!(global_scale > 0.0) || !(noise_shape > 0.0) || !(noise_scale > 0.0) || !(intercept_var > 0.0)) {
    throw Error(ErrorKind::ConfigError, "horseshoe hyperparameters must be positive");
  }
  if (n_forced < 0) throw Error(ErrorKind::ConfigError, "n_forced must be >= 0");
}

VectorXd HorseshoeFit::beta_mean() const {
  if (draws.empty()) return {};
  VectorXd m = VectorXd::Zero(draws.front().beta.size());
  for (const auto& d : draws) m += d.beta;
  return m / static_cast<double>(draws.size());
}

double horseshoe_prior_draw(double v, RngStream& rng) {
  const double lambda = sample_half_cauchy(v, rng);
  return lambda * rng.normal();
}

namespace {

constexpr double kMinPriorVar = 1e-14;

// Half-Cauchy scales through inverse-gamma auxiliaries:
// l_j^2 | xi_j ~ IG(1/2, 1/xi_j), xi_j ~ IG(1/2, 1); likewise v^2 with zeta.
struct HorseshoeScales {
  VectorXd l2;
  VectorXd xi;
  double v2 = 1.0;
  double zeta = 1.0;
  double s2_global = 1.0;

  HorseshoeScales(Eigen::Index p, double global_scale)
      : l2(VectorXd::Ones(p)), xi(VectorXd::Ones(p)), v2(global_scale * global_scale), s2_global(global_scale * global_scale) {}

  double prior_var(Eigen::Index j) const { return std::max(v2 * l2(j), kMinPriorVar); }

  void update(const VectorXd& beta, RngStream& rng) {
    const Eigen::Index p = beta.size();
    double s = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      l2(j) = std::max(sample_inverse_gamma(1.0, 1.0 / xi(j) + beta(j) * beta(j) / (2.0 * v2), rng), kMinPriorVar);
      xi(j) = sample_inverse_gamma(1.0, 1.0 + 1.0 / l2(j), rng);
      s += beta(j) * beta(j) / l2(j);
    }
    v2 = std::max(sample_inverse_gamma(0.5 * static_cast<double>(p + 1), 1.0 / zeta + 0.5 * s, rng), kMinPriorVar);
    zeta = sample_inverse_gamma(1.0, 1.0 / s2_global + 1.0 / v2, rng);
  }
};

}  // namespace

HorseshoeFit horseshoe_gibbs(const MatrixXd& x, const VectorXd& y, const HorseshoeConfig& config, RngStream& rng) {
  config.validate();
  const Eigen::Index n = x.rows();
  if (n < 2 || x.cols() < 1) throw Error(ErrorKind::ConfigError, "horseshoe needs N >= 2 and P >= 1");
  if (y.size() != n) throw Error(ErrorKind::DimensionMismatch, "X and Y lengths differ");
  if (config.n_forced > x.cols()) throw Error(ErrorKind::ConfigError, "n_forced exceeds the column count");
  const Eigen::Index n_fixed = 1 + config.n_forced;
  const Eigen::Index p = x.cols() - config.n_forced;
  RegressionBlock block(with_intercept(x), y);
  HorseshoeScales scales(p, config.global_scale);
  double s2 = std::max(sample_var(y), 1e-8);
  const double noise_scale = noise_prior_scale(config.noise_scale, y);
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(n_fixed + p));
  for (std::size_t c = 0; c < cols.size(); ++c) cols[c] = static_cast<Eigen::Index>(c);
  std::vector<double> vars(cols.size(), config.intercept_var);

  HorseshoeFit fit;
  const int total = config.burn_in + config.n_draws * config.thin;
  for (int it = 0; it < total; ++it) {
    for (Eigen::Index j = 0; j < p; ++j) vars[static_cast<std::size_t>(n_fixed + j)] = scales.prior_var(j);
    block.block_draw(cols, vars, s2, rng);
    const VectorXd beta = block.coef().tail(p);
    scales.update(beta, rng);
    s2 = sample_inverse_gamma(config.noise_shape + 0.5 * static_cast<double>(n), noise_scale + 0.5 * block.sse(), rng);
    if (!keep_iteration(it, config.burn_in, config.thin)) continue;
    HorseshoeState st;
    st.intercept = block.coef(0);
    st.forced = block.coef().segment(1, config.n_forced);
    st.beta = beta;
    st.lambda = (scales.l2 * scales.v2).cwiseSqrt();
    st.v = std::sqrt(scales.v2);
    st.noise_var = s2;
    fit.draws.push_back(std::move(st));
  }
  return fit;
}

double HahnReparamFit::beta_a_mean() const {
  if (draws.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : draws) s += d.beta_a;
  return s / static_cast<double>(draws.size());
}

HahnReparamFit hahn_reparam_fit(const MatrixXd& x, const VectorXd& a, const VectorXd& y, const HorseshoeConfig& config,
                                RngStream& rng) {
  config.validate();
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 2 || p < 1) throw Error(ErrorKind::ConfigError, "reparameterized model needs N >= 2 and P >= 1");
  if (a.size() != n || y.size() != n) throw Error(ErrorKind::DimensionMismatch, "X, A and Y lengths differ");
  if (config.n_forced != 0) throw Error(ErrorKind::ConfigError, "n_forced is not used by the reparameterized model");

  const MatrixXd xc = with_intercept(x);
  const MatrixXd gram = xc.transpose() * xc;
  VectorXd theta_c = VectorXd::Zero(p + 1);
  VectorXd theta_d = VectorXd::Zero(p + 1);
  double beta_a = 0.0;
  double s2 = std::max(sample_var(y), 1e-8);
  double s2a = std::max(sample_var(a), 1e-8);
  const double noise_y = noise_prior_scale(config.noise_scale, y);
  const double noise_a = noise_prior_scale(config.noise_scale, a);
  HorseshoeScales sc(p, config.global_scale);
  HorseshoeScales sd(p, config.global_scale);

  auto prior_diag = [&](const HorseshoeScales& s) {
    VectorXd d(p + 1);
    d(0) = 1.0 / config.intercept_var;
    for (Eigen::Index j = 0; j < p; ++j) d(j + 1) = 1.0 / s.prior_var(j);
    return d;
  };

  HahnReparamFit fit;
  const int total = config.burn_in + config.n_draws * config.thin;
  for (int it = 0; it < total; ++it) {
    // theta_c: treatment likelihood plus the outcome likelihood through the residual term.
    {
      const VectorXd direct = y - xc * theta_d - beta_a * a;
      MatrixXd q = gram * (1.0 / s2a + beta_a * beta_a / s2);
      q.diagonal() += prior_diag(sc);
      const VectorXd b = xc.transpose() * (a / s2a - beta_a * direct / s2);
      theta_c = draw_from_precision(q, b, rng);
    }
    const VectorXd r_a = a - xc * theta_c;
    {
      MatrixXd q = gram / s2;
      q.diagonal() += prior_diag(sd);
      const VectorXd b = xc.transpose() * (y - beta_a * r_a) / s2;
      theta_d = draw_from_precision(q, b, rng);
    }
    const VectorXd e = y - xc * theta_d;
    {
      const double prec = r_a.squaredNorm() / s2 + 1.0 / config.intercept_var;
      const double m = r_a.dot(e) / s2 / prec;
      beta_a = m + rng.normal() / std::sqrt(prec);
    }
    sc.update(theta_c.tail(p), rng);
    sd.update(theta_d.tail(p), rng);
    const double sse_y = (e - beta_a * r_a).squaredNorm();
    s2 = sample_inverse_gamma(config.noise_shape + 0.5 * static_cast<double>(n), noise_y + 0.5 * sse_y, rng);
    s2a = sample_inverse_gamma(config.noise_shape + 0.5 * static_cast<double>(n), noise_a + 0.5 * r_a.squaredNorm(), rng);
    if (!keep_iteration(it, config.burn_in, config.thin)) continue;
    HahnReparamState st;
    st.beta_a = beta_a;
    st.c0 = theta_c(0);
    st.beta_c = theta_c.tail(p);
    st.d0 = theta_d(0);
    st.beta_d = theta_d.tail(p);
    st.noise_var = s2;
    st.treatment_noise_var = s2a;
    fit.draws.push_back(std::move(st));
  }
  return fit;
}

}  // namespace bnpc
