#include "bnpc/causal/estimands.hpp"

#include <algorithm>
#include <cmath>

#include "bnpc/kernels.hpp"

namespace bnpc {

namespace {

std::vector<double> row_of(const MatrixXd& x, Eigen::Index i) {
  std::vector<double> r(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index c = 0; c < x.cols(); ++c) r[static_cast<std::size_t>(c)] = x(i, c);
  return r;
}

void check_level(double level) {
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::ConfigError, "credible level must lie in (0, 1)");
}

void check_model(const OutcomeModel& model) {
  if (model.n_draws() == 0) throw Error(ErrorKind::ConfigError, "outcome model has no posterior draws");
}

template <class Fn>
std::vector<McResult> per_draw(std::size_t b, Fn&& fn) {
  return kernels::map_index_omp(b, std::forward<Fn>(fn));
}

EstimandResult from_mc(std::string name, const std::vector<McResult>& r, double level) {
  std::vector<double> psi(r.size());
  std::vector<double> s2(r.size());
  for (std::size_t b = 0; b < r.size(); ++b) {
    psi[b] = r[b].psi;
    s2[b] = r[b].s2;
  }
  return summarize(std::move(name), std::move(psi), std::move(s2), level);
}

}  // namespace

double EstimandResult::posterior_sd() const { return draws.size() < 2 ? 0.0 : std::sqrt(variance(draws)); }

std::pair<std::size_t, std::size_t> interval_indices(std::size_t b, double level) {
  if (b == 0) throw Error(ErrorKind::InvalidParameter, "no draws to summarize");
  const double last = static_cast<double>(b - 1);
  const auto lo = static_cast<std::size_t>(std::floor(last * (1.0 - level) / 2.0));
  const auto hi = static_cast<std::size_t>(std::ceil(last * (1.0 + level) / 2.0));
  return {std::min(lo, b - 1), std::min(hi, b - 1)};
}

EstimandResult summarize(std::string name, std::vector<double> draws, std::vector<double> mc_var, double level) {
  check_level(level);
  EstimandResult r;
  r.name = std::move(name);
  r.level = level;
  r.estimate = mean(draws);
  std::vector<double> sorted = draws;
  std::sort(sorted.begin(), sorted.end());
  const auto [lo, hi] = interval_indices(sorted.size(), level);
  r.ci_lower = sorted[lo];
  r.ci_upper = sorted[hi];
  if (!mc_var.empty()) {
    const double ms2 = mean(mc_var);
    r.mc_se = std::sqrt(ms2);
    const double v = draws.size() < 2 ? 0.0 : variance(draws);
    r.mc_ok = ms2 == 0.0 || ms2 < 0.1 * v;
    if (!r.mc_ok) r.warnings.push_back("Monte Carlo error is not small relative to posterior spread; increase K");
  }
  r.draws = std::move(draws);
  r.mc_var = std::move(mc_var);
  return r;
}

EstimandResult cate(const OutcomeModel& model, std::span<const double> x, double level) {
  check_model(model);
  if (static_cast<int>(x.size()) != model.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "CATE query has " + std::to_string(x.size()) + " coordinates, model expects " +
                                                  std::to_string(model.dim()));
  }
  const std::vector<double> xv(x.begin(), x.end());
  auto draws = kernels::map_index_omp(model.n_draws(), [&](std::size_t b) { return model.effect(b, xv); });
  return summarize("cate", std::move(draws), {}, level);
}

EstimandResult sate(const OutcomeModel& model, const MatrixXd& x, double level) {
  check_model(model);
  if (x.cols() != model.dim()) throw Error(ErrorKind::DimensionMismatch, "SATE covariates have the wrong width");
  if (x.rows() == 0) throw Error(ErrorKind::EmptySelection, "SATE needs at least one unit");
  std::vector<std::vector<double>> rows;
  for (Eigen::Index i = 0; i < x.rows(); ++i) rows.push_back(row_of(x, i));
  auto draws = kernels::map_index_omp(model.n_draws(), [&](std::size_t b) {
    double s = 0.0;
    for (const auto& r : rows) s += model.effect(b, r);
    return s / static_cast<double>(rows.size());
  });
  return summarize("sate", std::move(draws), {}, level);
}

EstimandResult pate_bb(const OutcomeModel& model, const BayesianBootstrapPosterior& post, RngStream& rng, double level) {
  check_model(model);
  if (post.atoms.cols() != model.dim()) throw Error(ErrorKind::DimensionMismatch, "atoms have the wrong width");
  std::vector<std::vector<double>> atoms;
  for (Eigen::Index j = 0; j < post.atoms.rows(); ++j) atoms.push_back(row_of(post.atoms, j));
  auto draws = kernels::map_index_omp(model.n_draws(), [&](std::size_t b) {
    RngStream child = rng.split(b);
    const auto w = bb_sample_weights(post, child);
    double s = 0.0;
    for (std::size_t j = 0; j < atoms.size(); ++j) s += w[j] * model.effect(b, atoms[j]);
    return s;
  });
  return summarize("pate", std::move(draws), {}, level);
}

McResult pate_mc_draw(const OutcomeModel& model, std::size_t b, CovariateSampler& sampler, int n, int k,
                      RngStream& rng) {
  if (k < 1) throw Error(ErrorKind::ConfigError, "K must be >= 1");
  if (n < 1 || static_cast<long>(n) * k < 2) throw Error(ErrorKind::ConfigError, "need N*K >= 2 Monte Carlo samples");
  const std::size_t nk = static_cast<std::size_t>(n) * static_cast<std::size_t>(k);
  std::vector<double> delta(nk);
  for (std::size_t t = 0; t < nk; ++t) {
    const auto x = sampler.draw(rng);
    delta[t] = model.effect(b, x);
  }
  McResult r;
  r.psi = mean(delta);
  double ss = 0.0;
  for (double d : delta) ss += (d - r.psi) * (d - r.psi);
  r.s2 = ss / (static_cast<double>(nk) * static_cast<double>(nk - 1));
  return r;
}

EstimandResult pate_mc(const OutcomeModel& model, const CovariateLaw& law, int n, int k, RngStream& rng, double level) {
  check_model(model);
  if (k < 1) throw Error(ErrorKind::ConfigError, "K must be >= 1");
  if (law.dim() != model.dim()) throw Error(ErrorKind::DimensionMismatch, "covariate law has the wrong width");
  auto r = per_draw(model.n_draws(), [&](std::size_t b) {
    RngStream child = rng.split(b);
    auto sampler = law.for_draw(b, child);
    return pate_mc_draw(model, b, *sampler, n, k, child);
  });
  return from_mc("pate", r, level);
}

McResult quantile_effect_draw(const OutcomeModel& model, std::size_t b, CovariateSampler& sampler, double alpha, int n,
                              int k, RngStream& rng) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidParameter, "quantile level must lie in (0, 1)");
  if (k < 2) throw Error(ErrorKind::ConfigError, "quantile effects need K >= 2 for a Monte Carlo error estimate");
  if (n < 1) throw Error(ErrorKind::ConfigError, "N must be >= 1");
  const double sd0 = model.noise_sd(b, 0.0);
  const double sd1 = model.noise_sd(b, 1.0);
  std::vector<double> psi_k(static_cast<std::size_t>(k));
  std::vector<double> y0(static_cast<std::size_t>(n));
  std::vector<double> y1(static_cast<std::size_t>(n));
  for (int kk = 0; kk < k; ++kk) {
    for (int i = 0; i < n; ++i) {
      const auto x = sampler.draw(rng);
      // One noise draw per unit, shared by both arms.
      const double z = rng.normal();
      y0[static_cast<std::size_t>(i)] = model.mean(b, 0.0, x) + sd0 * z;
      y1[static_cast<std::size_t>(i)] = model.mean(b, 1.0, x) + sd1 * z;
    }
    psi_k[static_cast<std::size_t>(kk)] = quantile(y1, alpha) - quantile(y0, alpha);
  }
  McResult r;
  r.psi = mean(psi_k);
  double ss = 0.0;
  for (double p : psi_k) ss += (p - r.psi) * (p - r.psi);
  r.s2 = ss / (static_cast<double>(k) * static_cast<double>(k - 1));
  return r;
}

EstimandResult quantile_effect(const OutcomeModel& model, const CovariateLaw& law, double alpha, int n, int k,
                               RngStream& rng, double level) {
  check_model(model);
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::InvalidParameter, "quantile level must lie in (0, 1)");
  if (law.dim() != model.dim()) throw Error(ErrorKind::DimensionMismatch, "covariate law has the wrong width");
  auto r = per_draw(model.n_draws(), [&](std::size_t b) {
    RngStream child = rng.split(b);
    auto sampler = law.for_draw(b, child);
    return quantile_effect_draw(model, b, *sampler, alpha, n, k, child);
  });
  return from_mc(alpha == 0.5 ? "median_effect" : "quantile_effect", r, level);
}

EstimandResult att(const OutcomeModel& model, const Dataset& data, RngStream& rng, double level) {
  std::vector<int> treated;
  for (Eigen::Index i = 0; i < data.a.size(); ++i) {
    if (data.a(i) == 1.0) treated.push_back(static_cast<int>(i));
  }
  if (treated.empty()) throw Error(ErrorKind::EmptySelection, "ATT needs at least one treated unit");
  const MatrixXd xt = data.rows(treated).x;
  const auto post = bb_posterior(xt);
  EstimandResult r = pate_bb(model, post, rng, level);
  r.name = "att";
  return r;
}

EstimandResult subgroup_effect(const OutcomeModel& model, const BayesianBootstrapPosterior& post,
                               const RowPredicate& pred, RngStream& rng, double level) {
  check_model(model);
  if (post.atoms.cols() != model.dim()) throw Error(ErrorKind::DimensionMismatch, "atoms have the wrong width");
  std::vector<std::size_t> sel;
  std::vector<std::vector<double>> atoms;
  for (Eigen::Index j = 0; j < post.atoms.rows(); ++j) {
    auto r = row_of(post.atoms, j);
    if (pred(r)) {
      sel.push_back(static_cast<std::size_t>(j));
      atoms.push_back(std::move(r));
    }
  }
  if (sel.empty()) throw Error(ErrorKind::EmptySelection, "subgroup predicate selects no units");
  auto draws = kernels::map_index_omp(model.n_draws(), [&](std::size_t b) {
    RngStream child = rng.split(b);
    const auto w = bb_sample_weights(post, child);
    double s = 0.0;
    double wsum = 0.0;
    for (std::size_t t = 0; t < sel.size(); ++t) {
      s += w[sel[t]] * model.effect(b, atoms[t]);
      wsum += w[sel[t]];
    }
    return wsum > 0.0 ? s / wsum : 0.0;
  });
  return summarize("subgroup_effect", std::move(draws), {}, level);
}

}  // namespace bnpc
