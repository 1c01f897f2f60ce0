#include "bnpc/covariate_models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>

namespace bnpc {

namespace {

constexpr double kProbClamp = 1e-12;

double log_bernoulli(double x, double v) { return x * std::log(v) + (1.0 - x) * std::log1p(-v); }

double observed_mean(const MatrixXd& x, Eigen::Index c, int* count) {
  double s = 0.0;
  int n = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (!is_missing(x(i, c))) {
      s += x(i, c);
      ++n;
    }
  }
  if (count) *count = n;
  return n > 0 ? s / n : 0.0;
}

}  // namespace

bool is_missing(double v) { return std::isnan(v); }

BayesianBootstrapPosterior bb_posterior(const MatrixXd& x) {
  BayesianBootstrapPosterior post;
  post.n = static_cast<int>(x.rows());
  if (x.rows() == 0) throw Error(ErrorKind::InvalidParameter, "Bayesian bootstrap needs at least one row");
  std::map<std::vector<std::uint64_t>, int> index;
  std::vector<Eigen::Index> first_rows;
  post.atom_of_row.resize(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    std::vector<std::uint64_t> key(static_cast<std::size_t>(x.cols()));
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      if (is_missing(x(i, c))) {
        throw Error(ErrorKind::MissingDataUnsupported,
                    "Bayesian bootstrap cannot impute missing covariates; use the infinite mixture law");
      }
      key[static_cast<std::size_t>(c)] = std::bit_cast<std::uint64_t>(x(i, c));
    }
    auto [it, inserted] = index.emplace(std::move(key), static_cast<int>(first_rows.size()));
    if (inserted) {
      first_rows.push_back(i);
      post.counts.push_back(0.0);
    }
    post.counts[static_cast<std::size_t>(it->second)] += 1.0;
    post.atom_of_row[static_cast<std::size_t>(i)] = it->second;
  }
  post.atoms.resize(static_cast<Eigen::Index>(first_rows.size()), x.cols());
  for (std::size_t j = 0; j < first_rows.size(); ++j) post.atoms.row(static_cast<Eigen::Index>(j)) = x.row(first_rows[j]);
  return post;
}

std::vector<double> bb_sample_weights(const BayesianBootstrapPosterior& post, RngStream& rng) {
  return sample_dirichlet(post.counts, rng);
}

std::vector<double> stick_break(std::span<const double> raw) {
  if (raw.empty()) throw Error(ErrorKind::InvalidParameter, "stick_break needs at least one stick");
  for (double v : raw) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorKind::InvalidParameter, "raw sticks must lie in [0, 1]");
  }
  if (raw.back() != 1.0) throw Error(ErrorKind::InvalidParameter, "the last raw stick must equal 1");
  std::vector<double> w(raw.size());
  double rest = 1.0;
  for (std::size_t k = 0; k < raw.size(); ++k) {
    w[k] = raw[k] * rest;
    rest *= 1.0 - raw[k];
  }
  return w;
}

double expected_cluster_count(double alpha, int n) {
  if (!(alpha > 0.0) || n < 1) throw Error(ErrorKind::InvalidParameter, "need alpha > 0 and N >= 1");
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += 1.0 / (alpha + i);
  return 1.0 + alpha * s;
}

double exact_expected_cluster_count(double alpha, int n) {
  if (!(alpha > 0.0) || n < 1) throw Error(ErrorKind::InvalidParameter, "need alpha > 0 and N >= 1");
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += alpha / (alpha + i);
  return s;
}

std::vector<int> simulate_cluster_counts(double alpha, int n, int truncation, int reps, RngStream& rng) {
  if (!(alpha > 0.0) || n < 1 || truncation < 1 || reps < 1) {
    throw Error(ErrorKind::InvalidParameter, "invalid cluster-count simulation settings");
  }
  std::vector<int> out(static_cast<std::size_t>(reps));
  std::vector<double> raw(static_cast<std::size_t>(truncation), 1.0);
  for (int r = 0; r < reps; ++r) {
    for (int k = 0; k + 1 < truncation; ++k) raw[static_cast<std::size_t>(k)] = sample_beta(1.0, alpha, rng);
    const auto w = stick_break(raw);
    std::set<std::size_t> used;
    for (int i = 0; i < n; ++i) used.insert(sample_categorical(w, rng));
    out[static_cast<std::size_t>(r)] = static_cast<int>(used.size());
  }
  return out;
}

double StickBreakingMixture::log_component_density(int k, std::span<const double> x) const {
  if (static_cast<int>(x.size()) != dim()) throw Error(ErrorKind::DimensionMismatch, "mixture point dimension");
  double lp = 0.0;
  for (int c = 0; c < dim(); ++c) {
    const double v = x[static_cast<std::size_t>(c)];
    if (is_missing(v)) continue;
    if (kinds[static_cast<std::size_t>(c)] == ColumnKind::Binary) {
      lp += log_bernoulli(v, loc(k, c));
    } else {
      lp += log_normal_pdf(v, loc(k, c), scale2(k, c));
    }
  }
  return lp;
}

double StickBreakingMixture::log_density(std::span<const double> x) const {
  std::vector<double> lw(weights.size());
  for (int k = 0; k < n_components(); ++k) {
    lw[static_cast<std::size_t>(k)] = std::log(weights[static_cast<std::size_t>(k)]) + log_component_density(k, x);
  }
  return log_sum_exp(lw);
}

std::vector<double> StickBreakingMixture::class_posterior(std::span<const double> x) const {
  std::vector<double> lw(weights.size());
  for (int k = 0; k < n_components(); ++k) {
    lw[static_cast<std::size_t>(k)] = std::log(weights[static_cast<std::size_t>(k)]) + log_component_density(k, x);
  }
  const double lse = log_sum_exp(lw);
  if (!std::isfinite(lse)) throw Error(ErrorKind::ZeroEvidence, "observed coordinates have zero density under every class");
  for (double& v : lw) v = std::exp(v - lse);
  return lw;
}

std::vector<double> StickBreakingMixture::sample_conditional(std::span<const double> x, RngStream& rng) const {
  const auto w = class_posterior(x);
  const int k = static_cast<int>(sample_categorical(w, rng));
  std::vector<double> out(x.begin(), x.end());
  for (int c = 0; c < dim(); ++c) {
    auto& v = out[static_cast<std::size_t>(c)];
    if (!is_missing(v)) continue;
    if (kinds[static_cast<std::size_t>(c)] == ColumnKind::Binary) {
      v = rng.uniform() < loc(k, c) ? 1.0 : 0.0;
    } else {
      v = loc(k, c) + std::sqrt(scale2(k, c)) * rng.normal();
    }
  }
  return out;
}

std::vector<double> StickBreakingMixture::sample(RngStream& rng) const {
  std::vector<double> x(static_cast<std::size_t>(dim()), std::numeric_limits<double>::quiet_NaN());
  return sample_conditional(x, rng);
}

double imm_log_likelihood(const StickBreakingMixture& mix, const MatrixXd& x) {
  double ll = 0.0;
  std::vector<double> row(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) row[static_cast<std::size_t>(c)] = x(i, c);
    ll += mix.log_density(row);
  }
  return ll;
}

double imm_conditional_density(const StickBreakingMixture& mix, std::span<const double> x,
                               std::span<const double> x_missing) {
  if (static_cast<int>(x.size()) != mix.dim()) throw Error(ErrorKind::DimensionMismatch, "mixture point dimension");
  std::vector<double> query(static_cast<std::size_t>(mix.dim()), std::numeric_limits<double>::quiet_NaN());
  std::size_t m = 0;
  for (std::size_t c = 0; c < x.size(); ++c) {
    if (!is_missing(x[c])) continue;
    if (m >= x_missing.size()) throw Error(ErrorKind::DimensionMismatch, "too few missing-coordinate values");
    query[c] = x_missing[m++];
  }
  if (m != x_missing.size()) throw Error(ErrorKind::DimensionMismatch, "too many missing-coordinate values");
  const auto w = mix.class_posterior(x);
  double d = 0.0;
  for (int k = 0; k < mix.n_components(); ++k) {
    if (w[static_cast<std::size_t>(k)] == 0.0) continue;
    d += w[static_cast<std::size_t>(k)] * std::exp(mix.log_component_density(k, query));
  }
  return d;
}

void ImmConfig::validate() const {
  if (truncation < 1 || burn_in < 0 || n_draws < 1 || thin < 1) {
    throw Error(ErrorKind::ConfigError, "mixture fit needs truncation >= 1, burn_in >= 0, n_draws >= 1, thin >= 1");
  }
  if (fixed_alpha && !(*fixed_alpha > 0.0)) throw Error(ErrorKind::ConfigError, "fixed alpha must be > 0");
  if (!(alpha_shape > 0.0) || !(alpha_rate > 0.0) || !(kappa0 > 0.0) || !(a0 > 1.0)) {
    throw Error(ErrorKind::ConfigError, "mixture hyperparameters must be positive (a0 > 1)");
  }
}

namespace {

class ImmSampler {
 public:
  ImmSampler(const MatrixXd& x, const ImmConfig& cfg, RngStream& rng) : cfg_(cfg), x_(x) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    const int kk = cfg.truncation;
    missing_.resize(static_cast<std::size_t>(n * p));
    mix_.kinds.resize(static_cast<std::size_t>(p));
    m0_.resize(static_cast<std::size_t>(p));
    b0_.resize(static_cast<std::size_t>(p));
    for (Eigen::Index c = 0; c < p; ++c) {
      int count = 0;
      const double m = observed_mean(x, c, &count);
      if (count == 0) throw Error(ErrorKind::AllMissingColumn, "covariate column " + std::to_string(c) + " has no observed values");
      bool binary = true;
      double ss = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double v = x(i, c);
        missing_[static_cast<std::size_t>(i * p + c)] = is_missing(v);
        if (is_missing(v)) {
          x_(i, c) = m;
          continue;
        }
        binary = binary && (v == 0.0 || v == 1.0);
        ss += (v - m) * (v - m);
      }
      ColumnKind kind = binary ? ColumnKind::Binary : ColumnKind::Continuous;
      if (!cfg.kinds.empty()) {
        if (cfg.kinds.size() != static_cast<std::size_t>(p)) throw Error(ErrorKind::ConfigError, "column kinds length mismatch");
        kind = cfg.kinds[static_cast<std::size_t>(c)];
      }
      if (kind == ColumnKind::Binary) {
        for (Eigen::Index i = 0; i < n; ++i) {
          if (!missing_[static_cast<std::size_t>(i * p + c)] && x(i, c) != 0.0 && x(i, c) != 1.0) {
            throw Error(ErrorKind::ConfigError, "binary column has values other than 0/1");
          }
          if (missing_[static_cast<std::size_t>(i * p + c)]) x_(i, c) = m < 0.5 ? 0.0 : 1.0;
        }
      }
      mix_.kinds[static_cast<std::size_t>(c)] = kind;
      m0_[static_cast<std::size_t>(c)] = m;
      const double var = count > 1 ? ss / (count - 1) : 0.0;
      b0_[static_cast<std::size_t>(c)] = 0.5 * (var > 0.0 ? var : 1.0) * (cfg.a0 - 1.0);
    }
    mix_.alpha = cfg.fixed_alpha.value_or(1.0);
    mix_.loc.resize(kk, p);
    mix_.scale2.resize(kk, p);
    labels_.resize(static_cast<std::size_t>(n));
    std::fill(labels_.begin(), labels_.end(), 0);
    update_weights(rng);
    update_components(rng);
  }

  void sweep(RngStream& rng) {
    update_labels(rng);
    if (cfg_.weight_update == WeightUpdate::SymmetricDirichlet) update_alpha_collapsed(rng);
    update_weights(rng);
    update_components(rng);
    update_missing(rng);
    if (cfg_.weight_update == WeightUpdate::StickBreaking) update_alpha_sticks(rng);
  }

  const StickBreakingMixture& mixture() const { return mix_; }
  const MatrixXd& completed() const { return x_; }
  const std::vector<int>& labels() const { return labels_; }
  bool any_missing() const { return std::find(missing_.begin(), missing_.end(), 1) != missing_.end(); }

 private:
  std::vector<double> counts() const {
    std::vector<double> nk(static_cast<std::size_t>(cfg_.truncation), 0.0);
    for (int l : labels_) nk[static_cast<std::size_t>(l)] += 1.0;
    return nk;
  }

  // Labels one at a time given the weights, with component parameters
  // integrated out under the conjugate base measure.
  void update_labels(RngStream& rng) {
    const int kk = cfg_.truncation;
    const Eigen::Index p = x_.cols();
    const auto ku = static_cast<std::size_t>(kk);
    std::vector<double> n(ku, 0.0);
    MatrixXd s = MatrixXd::Zero(kk, p), ss = MatrixXd::Zero(kk, p);
    for (Eigen::Index i = 0; i < x_.rows(); ++i) {
      const int k = labels_[static_cast<std::size_t>(i)];
      n[static_cast<std::size_t>(k)] += 1.0;
      for (Eigen::Index c = 0; c < p; ++c) {
        s(k, c) += x_(i, c);
        ss(k, c) += x_(i, c) * x_(i, c);
      }
    }
    std::vector<double> log_w(ku), lw(ku);
    for (int k = 0; k < kk; ++k) log_w[static_cast<std::size_t>(k)] = std::log(mix_.weights[static_cast<std::size_t>(k)]);
    for (Eigen::Index i = 0; i < x_.rows(); ++i) {
      const int old = labels_[static_cast<std::size_t>(i)];
      n[static_cast<std::size_t>(old)] -= 1.0;
      for (Eigen::Index c = 0; c < p; ++c) {
        s(old, c) -= x_(i, c);
        ss(old, c) -= x_(i, c) * x_(i, c);
      }
      for (int k = 0; k < kk; ++k) {
        const double nk = n[static_cast<std::size_t>(k)];
        double lp = log_w[static_cast<std::size_t>(k)];
        for (Eigen::Index c = 0; c < p; ++c) {
          const double v = x_(i, c);
          const auto cs = static_cast<std::size_t>(c);
          if (mix_.kinds[cs] == ColumnKind::Binary) {
            const double p1 = (1.0 + s(k, c)) / (2.0 + nk);
            lp += std::log(v == 1.0 ? p1 : 1.0 - p1);
            continue;
          }
          const double xbar = nk > 0.0 ? s(k, c) / nk : 0.0;
          const double dev = nk > 0.0 ? std::max(ss(k, c) - nk * xbar * xbar, 0.0) : 0.0;
          const double kn = cfg_.kappa0 + nk;
          const double mn = (cfg_.kappa0 * m0_[cs] + s(k, c)) / kn;
          const double an = cfg_.a0 + 0.5 * nk;
          const double bn = b0_[cs] + 0.5 * dev + cfg_.kappa0 * nk * (xbar - m0_[cs]) * (xbar - m0_[cs]) / (2.0 * kn);
          const double scale2 = bn * (kn + 1.0) / (an * kn);
          const double nu = 2.0 * an;
          const double z = (v - mn) * (v - mn) / (nu * scale2);
          lp += std::lgamma(0.5 * (nu + 1.0)) - std::lgamma(0.5 * nu) - 0.5 * std::log(nu * std::numbers::pi * scale2) -
                0.5 * (nu + 1.0) * std::log1p(z);
        }
        lw[static_cast<std::size_t>(k)] = lp;
      }
      const int k = static_cast<int>(sample_categorical_log(lw, rng));
      labels_[static_cast<std::size_t>(i)] = k;
      n[static_cast<std::size_t>(k)] += 1.0;
      for (Eigen::Index c = 0; c < p; ++c) {
        s(k, c) += x_(i, c);
        ss(k, c) += x_(i, c) * x_(i, c);
      }
    }
  }

  void update_weights(RngStream& rng) {
    const int kk = cfg_.truncation;
    const auto nk = counts();
    mix_.sticks.assign(static_cast<std::size_t>(kk), 1.0);
    if (cfg_.weight_update == WeightUpdate::StickBreaking) {
      double tail = 0.0;
      for (double v : nk) tail += v;
      for (int k = 0; k + 1 < kk; ++k) {
        tail -= nk[static_cast<std::size_t>(k)];
        mix_.sticks[static_cast<std::size_t>(k)] = sample_beta(1.0 + nk[static_cast<std::size_t>(k)], mix_.alpha + tail, rng);
      }
      mix_.weights = stick_break(mix_.sticks);
      return;
    }
    std::vector<double> a(static_cast<std::size_t>(kk));
    for (int k = 0; k < kk; ++k) a[static_cast<std::size_t>(k)] = mix_.alpha / kk + nk[static_cast<std::size_t>(k)];
    mix_.weights = sample_dirichlet(a, rng);
    double rest = 1.0;
    for (int k = 0; k + 1 < kk; ++k) {
      const double w = mix_.weights[static_cast<std::size_t>(k)];
      mix_.sticks[static_cast<std::size_t>(k)] = rest > 0.0 ? std::clamp(w / rest, 0.0, 1.0) : 1.0;
      rest -= w;
    }
  }

  void update_components(RngStream& rng) {
    const int kk = cfg_.truncation;
    const Eigen::Index p = x_.cols();
    std::vector<double> n(static_cast<std::size_t>(kk)), s(static_cast<std::size_t>(kk)), ss(static_cast<std::size_t>(kk));
    for (Eigen::Index c = 0; c < p; ++c) {
      std::fill(n.begin(), n.end(), 0.0);
      std::fill(s.begin(), s.end(), 0.0);
      std::fill(ss.begin(), ss.end(), 0.0);
      for (Eigen::Index i = 0; i < x_.rows(); ++i) {
        const auto k = static_cast<std::size_t>(labels_[static_cast<std::size_t>(i)]);
        n[k] += 1.0;
        s[k] += x_(i, c);
      }
      for (Eigen::Index i = 0; i < x_.rows(); ++i) {
        const auto k = static_cast<std::size_t>(labels_[static_cast<std::size_t>(i)]);
        const double d = x_(i, c) - s[k] / n[k];
        ss[k] += d * d;
      }
      const auto cs = static_cast<std::size_t>(c);
      for (int k = 0; k < kk; ++k) {
        const auto ks = static_cast<std::size_t>(k);
        if (mix_.kinds[cs] == ColumnKind::Binary) {
          const double v = sample_beta(1.0 + s[ks], 1.0 + n[ks] - s[ks], rng);
          mix_.loc(k, c) = std::clamp(v, kProbClamp, 1.0 - kProbClamp);
          mix_.scale2(k, c) = 0.0;
          continue;
        }
        const double xbar = n[ks] > 0 ? s[ks] / n[ks] : 0.0;
        const double kn = cfg_.kappa0 + n[ks];
        const double mn = (cfg_.kappa0 * m0_[cs] + s[ks]) / kn;
        const double an = cfg_.a0 + 0.5 * n[ks];
        const double bn =
            b0_[cs] + 0.5 * ss[ks] + cfg_.kappa0 * n[ks] * (xbar - m0_[cs]) * (xbar - m0_[cs]) / (2.0 * kn);
        const double var = std::max(sample_inverse_gamma(an, bn, rng), 1e-300);
        mix_.scale2(k, c) = var;
        mix_.loc(k, c) = mn + std::sqrt(var / kn) * rng.normal();
      }
    }
  }

  void update_missing(RngStream& rng) {
    const Eigen::Index p = x_.cols();
    for (Eigen::Index i = 0; i < x_.rows(); ++i) {
      const int k = labels_[static_cast<std::size_t>(i)];
      for (Eigen::Index c = 0; c < p; ++c) {
        if (!missing_[static_cast<std::size_t>(i * p + c)]) continue;
        if (mix_.kinds[static_cast<std::size_t>(c)] == ColumnKind::Binary) {
          x_(i, c) = rng.uniform() < mix_.loc(k, c) ? 1.0 : 0.0;
        } else {
          x_(i, c) = mix_.loc(k, c) + std::sqrt(mix_.scale2(k, c)) * rng.normal();
        }
      }
    }
  }

  void update_alpha_sticks(RngStream& rng) {
    if (cfg_.fixed_alpha) return;
    double s = 0.0;
    for (int k = 0; k + 1 < cfg_.truncation; ++k) {
      s += std::log1p(-std::min(mix_.sticks[static_cast<std::size_t>(k)], 1.0 - 1e-16));
    }
    mix_.alpha = sample_gamma(cfg_.alpha_shape + cfg_.truncation - 1, cfg_.alpha_rate - s, rng);
  }

  // alpha | labels with the weights integrated out, by random-walk MH on log alpha.
  void update_alpha_collapsed(RngStream& rng) {
    if (cfg_.fixed_alpha) return;
    const auto nk = counts();
    const double n = static_cast<double>(labels_.size());
    const double kk = cfg_.truncation;
    auto log_post = [&](double a) {
      double lp = (cfg_.alpha_shape - 1.0) * std::log(a) - cfg_.alpha_rate * a;
      lp += std::lgamma(a) - std::lgamma(a + n);
      for (double c : nk) {
        if (c > 0) lp += std::lgamma(a / kk + c) - std::lgamma(a / kk);
      }
      return lp + std::log(a);
    };
    const double cur = mix_.alpha;
    const double prop = cur * std::exp(0.5 * rng.normal());
    if (std::log(rng.uniform()) < log_post(prop) - log_post(cur)) mix_.alpha = prop;
  }

  ImmConfig cfg_;
  MatrixXd x_;
  std::vector<char> missing_;
  std::vector<double> m0_;
  std::vector<double> b0_;
  std::vector<int> labels_;
  StickBreakingMixture mix_;
};

}  // namespace

ImmFit imm_fit(const MatrixXd& x, const ImmConfig& config, RngStream& rng) {
  config.validate();
  if (x.rows() == 0 || x.cols() == 0) throw Error(ErrorKind::ConfigError, "mixture fit needs a nonempty matrix");
  ImmSampler sampler(x, config, rng);
  ImmFit fit;
  const int total = config.burn_in + config.n_draws * config.thin;
  const bool keep_imputed = sampler.any_missing();
  for (int it = 0; it < total; ++it) {
    sampler.sweep(rng);
    if (it < config.burn_in || (it - config.burn_in) % config.thin != 0) continue;
    fit.draws.push_back(sampler.mixture());
    fit.labels.push_back(sampler.labels());
    if (keep_imputed) fit.imputed.push_back(sampler.completed());
  }
  return fit;
}

std::vector<double> imm_impute_mh(const StickBreakingMixture& mix, std::span<const double> current,
                                  std::span<const char> missing, const LikelihoodCallback& likelihood,
                                  RngStream& rng) {
  if (current.size() != missing.size() || static_cast<int>(current.size()) != mix.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "record, mask and mixture dimensions differ");
  }
  std::vector<double> observed(current.begin(), current.end());
  for (std::size_t c = 0; c < observed.size(); ++c) {
    if (missing[c]) observed[c] = std::numeric_limits<double>::quiet_NaN();
  }
  std::vector<double> proposal = mix.sample_conditional(observed, rng);
  auto checked = [&](std::span<const double> x) {
    const double v = likelihood(x);
    if (std::isnan(v) || v < 0.0 || std::isinf(v)) {
      throw Error(ErrorKind::CallbackFailure, "likelihood callback returned a negative or non-finite value");
    }
    return v;
  };
  const double f_new = checked(proposal);
  const double f_old = checked(current);
  const double u = rng.uniform();
  bool accept = false;
  if (f_old > 0.0) {
    accept = u < f_new / f_old;
  } else {
    accept = f_new > 0.0;
  }
  if (accept) return proposal;
  return std::vector<double>(current.begin(), current.end());
}

DiscreteSampler::DiscreteSampler(const MatrixXd* atoms, std::vector<double> weights) : atoms_(atoms) {
  if (static_cast<Eigen::Index>(weights.size()) != atoms->rows()) {
    throw Error(ErrorKind::DimensionMismatch, "one weight per atom required");
  }
  cumulative_.resize(weights.size());
  double s = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (!(weights[j] >= 0.0)) throw Error(ErrorKind::InvalidParameter, "atom weights must be >= 0");
    s += weights[j];
    cumulative_[j] = s;
  }
  if (!(s > 0.0)) throw Error(ErrorKind::InvalidParameter, "atom weights sum to zero");
}

std::size_t DiscreteSampler::draw_index(RngStream& rng) const {
  const double u = rng.uniform() * cumulative_.back();
  auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
  if (it == cumulative_.end()) --it;
  return static_cast<std::size_t>(it - cumulative_.begin());
}

std::vector<double> DiscreteSampler::draw(RngStream& rng) {
  const auto j = static_cast<Eigen::Index>(draw_index(rng));
  std::vector<double> row(static_cast<std::size_t>(atoms_->cols()));
  for (Eigen::Index c = 0; c < atoms_->cols(); ++c) row[static_cast<std::size_t>(c)] = (*atoms_)(j, c);
  return row;
}

std::unique_ptr<CovariateSampler> BootstrapLaw::for_draw(std::size_t, RngStream& rng) const {
  return std::make_unique<DiscreteSampler>(&post_.atoms, bb_sample_weights(post_, rng));
}

FixedDiscreteLaw::FixedDiscreteLaw(MatrixXd atoms, std::vector<double> weights)
    : atoms_(std::move(atoms)), weights_(std::move(weights)) {
  DiscreteSampler check(&atoms_, weights_);
}

std::unique_ptr<CovariateSampler> FixedDiscreteLaw::for_draw(std::size_t, RngStream&) const {
  return std::make_unique<DiscreteSampler>(&atoms_, weights_);
}

namespace {

class MixtureSampler : public CovariateSampler {
 public:
  explicit MixtureSampler(const StickBreakingMixture* mix) : mix_(mix) {}
  std::vector<double> draw(RngStream& rng) override { return mix_->sample(rng); }

 private:
  const StickBreakingMixture* mix_;
};

}  // namespace

MixtureLaw::MixtureLaw(std::vector<StickBreakingMixture> draws) : draws_(std::move(draws)) {
  if (draws_.empty()) throw Error(ErrorKind::InvalidParameter, "mixture law needs at least one draw");
}

std::unique_ptr<CovariateSampler> MixtureLaw::for_draw(std::size_t b, RngStream&) const {
  return std::make_unique<MixtureSampler>(&draws_[b % draws_.size()]);
}

}  // namespace bnpc
