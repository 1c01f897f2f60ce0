#include "bnpc/causal/mediation.hpp"

#include "bnpc/kernels.hpp"

namespace bnpc {

namespace {

std::vector<double> with_propensity(std::vector<double> row, const PropensityModel* prop, std::span<const double> x) {
  if (prop) row.push_back(clamp_propensity(prop->predict(x)));
  return row;
}

}  // namespace

BartMediatorModel::BartMediatorModel(BartFit fit, std::shared_ptr<const PropensityModel> prop, int p)
    : fit_(std::move(fit)), prop_(std::move(prop)), p_(p) {}

double BartMediatorModel::sample(std::size_t b, double a, std::span<const double> x, RngStream& rng) const {
  std::vector<double> row{a};
  row.insert(row.end(), x.begin(), x.end());
  row = with_propensity(std::move(row), prop_.get(), x);
  return fit_.draws[b].eval(row) + fit_.sigma[b] * rng.normal();
}

BartMediatedOutcome::BartMediatedOutcome(BartFit fit, std::shared_ptr<const PropensityModel> prop, int p)
    : fit_(std::move(fit)), prop_(std::move(prop)), p_(p) {}

double BartMediatedOutcome::mean(std::size_t b, double a, double m, std::span<const double> x) const {
  std::vector<double> row{a, m};
  row.insert(row.end(), x.begin(), x.end());
  row = with_propensity(std::move(row), prop_.get(), x);
  return fit_.draws[b].eval(row);
}

MediationModels fit_mediation_models(const Dataset& data, std::shared_ptr<const PropensityModel> prop,
                                     const BartConfig& config, RngStream& rng) {
  data.validate();
  if (!data.m) throw Error(ErrorKind::IncompatibleEstimand, "mediation needs a mediator column");
  if (data.has_missing()) throw Error(ErrorKind::MissingDataUnsupported, "mediation models need complete covariates");
  const Eigen::Index n = data.n();
  const Eigen::Index p = data.p();
  const Eigen::Index extra = prop ? 1 : 0;
  MatrixXd dm(n, 1 + p + extra);
  MatrixXd dy(n, 2 + p + extra);
  dm.col(0) = data.a;
  dm.middleCols(1, p) = data.x;
  dy.col(0) = data.a;
  dy.col(1) = *data.m;
  dy.middleCols(2, p) = data.x;
  if (prop) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double e = clamp_propensity(prop->e_hat()[static_cast<std::size_t>(i)]);
      dm(i, 1 + p) = e;
      dy(i, 2 + p) = e;
    }
  }
  BartConfig c = config;
  c.keep_forests = true;
  RngStream rm = rng.split(1);
  RngStream ry = rng.split(2);
  MediationModels out;
  out.mediator = std::make_unique<BartMediatorModel>(fit_bart(dm, *data.m, c, rm), prop, static_cast<int>(p));
  out.outcome = std::make_unique<BartMediatedOutcome>(fit_bart(dy, data.y, c, ry), prop, static_cast<int>(p));
  return out;
}

MediationDraw mediation_draw(const MediatedOutcomeModel& outcome, const MediatorModel& mediator, std::size_t b,
                             CovariateSampler& sampler, int n, int k, RngStream& rng) {
  if (k < 1) throw Error(ErrorKind::ConfigError, "K must be >= 1");
  if (n < 1 || static_cast<long>(n) * k < 2) throw Error(ErrorKind::ConfigError, "need N*K >= 2 Monte Carlo samples");
  const std::size_t nk = static_cast<std::size_t>(n) * static_cast<std::size_t>(k);
  std::vector<double> dz[2], dd[2], dt;
  for (int a = 0; a < 2; ++a) {
    dz[a].resize(nk);
    dd[a].resize(nk);
  }
  dt.resize(nk);
  for (std::size_t t = 0; t < nk; ++t) {
    const auto x = sampler.draw(rng);
    const double m[2] = {mediator.sample(b, 0.0, x, rng), mediator.sample(b, 1.0, x, rng)};
    double y[2][2];
    for (int a = 0; a < 2; ++a) {
      for (int ap = 0; ap < 2; ++ap) y[a][ap] = outcome.mean(b, a, m[ap], x);
    }
    for (int a = 0; a < 2; ++a) {
      dd[a][t] = y[a][1] - y[a][0];
      dz[a][t] = y[1][a] - y[0][a];
    }
    dt[t] = y[1][1] - y[0][0];
  }
  const double denom = static_cast<double>(nk) * static_cast<double>(nk - 1);
  auto mc = [&](const std::vector<double>& v, double& psi, double& s2) {
    psi = mean(v);
    double ss = 0.0;
    for (double d : v) ss += (d - psi) * (d - psi);
    s2 = ss / denom;
  };
  MediationDraw r;
  for (int a = 0; a < 2; ++a) {
    mc(dz[a], r.zeta[a], r.s2_zeta[a]);
    mc(dd[a], r.delta[a], r.s2_delta[a]);
  }
  mc(dt, r.total, r.s2_total);
  return r;
}

MediationResult mediation_effects(const MediatedOutcomeModel& outcome, const MediatorModel& mediator,
                                  const CovariateLaw& law, int n, int k, RngStream& rng, double level) {
  if (outcome.n_draws() == 0 || outcome.n_draws() != mediator.n_draws()) {
    throw Error(ErrorKind::ConfigError, "outcome and mediator models need the same nonzero number of draws");
  }
  if (outcome.dim() != law.dim() || mediator.dim() != law.dim()) {
    throw Error(ErrorKind::DimensionMismatch, "covariate law width differs from the models");
  }
  if (k < 1) throw Error(ErrorKind::ConfigError, "K must be >= 1");
  const auto draws = kernels::map_index_omp(outcome.n_draws(), [&](std::size_t b) {
    RngStream child = rng.split(b);
    auto sampler = law.for_draw(b, child);
    return mediation_draw(outcome, mediator, b, *sampler, n, k, child);
  });
  const std::size_t bn = draws.size();
  auto collect = [&](auto value, auto var, const char* name) {
    std::vector<double> v(bn), s(bn);
    for (std::size_t b = 0; b < bn; ++b) {
      v[b] = value(draws[b]);
      s[b] = var(draws[b]);
    }
    return summarize(name, std::move(v), std::move(s), level);
  };
  MediationResult r;
  r.zeta0 = collect([](const MediationDraw& d) { return d.zeta[0]; }, [](const MediationDraw& d) { return d.s2_zeta[0]; }, "zeta0");
  r.zeta1 = collect([](const MediationDraw& d) { return d.zeta[1]; }, [](const MediationDraw& d) { return d.s2_zeta[1]; }, "zeta1");
  r.delta0 = collect([](const MediationDraw& d) { return d.delta[0]; }, [](const MediationDraw& d) { return d.s2_delta[0]; }, "delta0");
  r.delta1 = collect([](const MediationDraw& d) { return d.delta[1]; }, [](const MediationDraw& d) { return d.s2_delta[1]; }, "delta1");
  r.total = collect([](const MediationDraw& d) { return d.total; }, [](const MediationDraw& d) { return d.s2_total; }, "total");
  return r;
}

}  // namespace bnpc
