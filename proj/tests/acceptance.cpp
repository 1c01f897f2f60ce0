#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "bnpc/causal/bcf.hpp"
#include "bnpc/causal/estimands.hpp"
#include "bnpc/causal/mediation.hpp"
#include "bnpc/causal/propensity.hpp"
#include "bnpc/causal/rdd.hpp"
#include "bnpc/causal/selection_bias.hpp"
#include "bnpc/cli/csv_io.hpp"
#include "bnpc/cli/dgp.hpp"
#include "bnpc/cli/pipeline.hpp"
#include "bnpc/covariate_models.hpp"
#include "bnpc/gp.hpp"
#include "bnpc/sparse_linear.hpp"
#include "oracles.hpp"
#include "test_models.hpp"

using namespace bnpc;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    if (!detail.empty()) detail += "; ";
    detail += what + (ok ? "" : " [fail]");
  }
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

MatrixXd uniform_matrix(Eigen::Index r, Eigen::Index c, RngStream& rng) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = 2.0 * rng.uniform() - 1.0;
  return m;
}

MatrixXd normal_matrix(Eigen::Index r, Eigen::Index c, RngStream& rng) {
  MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

double rel_err(const MatrixXd& a, const MatrixXd& b) {
  const double scale = std::max(b.cwiseAbs().maxCoeff(), 1e-300);
  return (a - b).cwiseAbs().maxCoeff() / scale;
}

cli::Simulation simulate(const std::string& name, int n, int p, std::uint64_t seed,
                         std::map<std::string, double> params = {}) {
  cli::DgpSpec s;
  s.name = name;
  s.n = n;
  s.p = p;
  s.seed = seed;
  s.params = std::move(params);
  return cli::simulate(s);
}

Outcome gp_conjugacy() {
  Outcome out;
  RngStream rng(101, 0);
  double worst_post = 0.0, worst_ll = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const int n = 1 + static_cast<int>(rng.uniform() * 20.0);
    const int p = 1 + static_cast<int>(rng.uniform() * 3.0);
    const MatrixXd x = uniform_matrix(n, p, rng);
    const VectorXd y = uniform_matrix(n, 1, rng) * 2.0;
    const MatrixXd q = uniform_matrix(5, p, rng);
    const double rho = 0.2 + 4.0 * rng.uniform();
    const double s2g = 0.1 + 2.0 * rng.uniform();
    const double s2 = 0.05 + rng.uniform();
    const double m0 = rng.normal();
    const GpPrior prior = GpPrior::constant_mean(m0, {rho, s2g});
    const GpPrediction pr = gp_posterior(prior, x, y, s2).predict(q);
    const auto o = oracle::condition_joint(m0, rho, s2g, x, y, s2, q);
    worst_post = std::max({worst_post, rel_err(pr.mean, o.mean), rel_err(pr.cov, o.cov)});
    MatrixXd cov = oracle::cross(x, x, rho, s2g);
    cov += s2 * MatrixXd::Identity(n, n);
    const double dense = oracle::dense_log_normal(y, VectorXd::Constant(n, m0), cov);
    const double ll = gp_marginal_loglik(prior, x, y, s2);
    worst_ll = std::max(worst_ll, std::abs(ll - dense) / std::max(std::abs(dense), 1e-300));
  }
  out.require(worst_post < 1e-8, "max posterior rel err " + fmt("%.2e", worst_post));
  out.require(worst_ll < 1e-8, "max loglik rel err " + fmt("%.2e", worst_ll));
  return out;
}

Outcome spike_slab_enumeration() {
  Outcome out;
  const int n = 50, p = 8;
  double worst = 0.0;
  for (int dgp = 0; dgp < 20; ++dgp) {
    RngStream rng(200 + dgp, 0);
    const MatrixXd x = normal_matrix(n, p, rng);
    VectorXd beta = VectorXd::Zero(p);
    for (int j = 0; j < p; ++j) {
      if (rng.uniform() < 0.4) beta(j) = (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.2 + 0.6 * rng.uniform());
    }
    const VectorXd y = 0.5 + (x * beta).array() + VectorXd::NullaryExpr(n, [&] { return rng.normal(); }).array();
    SpikeSlabConfig c;
    c.burn_in = 1000;
    c.n_draws = 20000;
    c.fixed_slab_var = 1.0;
    c.fixed_noise_var = 1.0;
    const VectorXd gibbs = spike_slab_gibbs(x, y, c, rng).inclusion_prob();
    const VectorXd ones = VectorXd::Ones(n);
    const auto exact = oracle::enumerate_inclusion(p, c.tau_a, c.tau_b, [&](int mask) {
      std::vector<VectorXd> cols{ones};
      std::vector<double> vars{c.intercept_var};
      for (int j = 0; j < p; ++j) {
        if ((mask >> j) & 1) {
          cols.push_back(x.col(j));
          vars.push_back(1.0);
        }
      }
      return oracle::dense_log_normal(y, VectorXd::Zero(n), oracle::linear_marginal_cov(cols, vars, 1.0));
    });
    for (int j = 0; j < p; ++j) worst = std::max(worst, std::abs(gibbs(j) - exact[static_cast<std::size_t>(j)]));
  }
  out.require(worst < 0.05, "max |gibbs - exact| " + fmt("%.4f", worst));
  return out;
}

Outcome ric_reproduction() {
  Outcome out;
  for (std::uint64_t seed : {1, 2, 3}) {
    RngStream rng(seed, 0);
    const RicDiagnostic d = ric_prior_diagnostic(RicConfig{}, rng);
    const double ratio = d.rows.back().sd / d.rows.front().sd;
    std::string sds;
    for (const auto& r : d.rows) sds += fmt(" %.4f", r.sd);
    out.require(d.decreasing() && ratio < 0.5, "seed " + std::to_string(seed) + " sd" + sds + " ratio " + fmt("%.3f", ratio));
  }
  return out;
}

Outcome selection_bias_identity() {
  Outcome out;
  RngStream rng(401, 0);
  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const int j = 2 + static_cast<int>(rng.uniform() * 50.0);
    std::vector<double> e(static_cast<std::size_t>(j)), g(e.size()), w(e.size());
    for (std::size_t i = 0; i < e.size(); ++i) {
      e[i] = 0.01 + 0.98 * rng.uniform();
      g[i] = 3.0 * rng.normal();
      w[i] = rng.uniform() + 1e-3;
    }
    worst = std::max(worst, std::abs(selection_bias(e, g, w) - selection_bias_direct(e, g, w)));
  }
  out.require(worst < 1e-12, "max abs diff " + fmt("%.2e", worst));
  return out;
}

Outcome bcf_coverage() {
  Outcome out;
  int covered = 0;
  double bias_bcf = 0.0, bias_bart = 0.0;
  const int reps = 100;
  for (int rep = 0; rep < reps; ++rep) {
    const auto sim = simulate("linear_confounded", 500, 10, 5000 + static_cast<std::uint64_t>(rep));
    const double truth = sim.truth.values.at("pate");
    RngStream rng(501, static_cast<std::uint64_t>(rep));
    auto prop = std::make_shared<const PropensityModel>(fit_propensity(sim.data, PropensityConfig{}, rng));
    const BcfFit bcf = fit_bcf(sim.data, prop, BcfConfig{}, rng);
    const BartOutcome bart = fit_bart_outcome(sim.data, nullptr, BartConfig{}, rng);
    const auto post = bb_posterior(sim.data.x);
    RngStream r1 = rng.split(1), r2 = rng.split(2);
    const auto e_bcf = pate_bb(bcf, post, r1, 0.9);
    const auto e_bart = pate_bb(bart, post, r2, 0.9);
    covered += (e_bcf.ci_lower <= truth && truth <= e_bcf.ci_upper) ? 1 : 0;
    bias_bcf += std::abs(e_bcf.estimate - truth) / reps;
    bias_bart += std::abs(e_bart.estimate - truth) / reps;
  }
  out.require(covered >= 80 && covered <= 98, "covered " + std::to_string(covered) + "/100");
  out.require(bias_bcf < bias_bart, "mean |bias| bcf " + fmt("%.4f", bias_bcf) + " vs bart " + fmt("%.4f", bias_bart));
  return out;
}

Outcome mc_se_calibration() {
  Outcome out;
  const auto sim = simulate("friedman", 200, 5, 61);
  RngStream rng(601, 0);
  BartConfig c;
  c.burn_in = 200;
  c.n_draws = 10;
  const BartOutcome model = fit_bart_outcome(sim.data, nullptr, c, rng);
  const FixedDiscreteLaw law(sim.data.x, std::vector<double>(static_cast<std::size_t>(sim.data.n()), 1.0));
  const std::size_t b = 0;
  auto run = [&](int k) {
    std::vector<double> psi, s;
    for (int rep = 0; rep < 50; ++rep) {
      RngStream r(6000 + static_cast<std::uint64_t>(rep), static_cast<std::uint64_t>(k));
      auto sampler = law.for_draw(b, r);
      const McResult m = pate_mc_draw(model, b, *sampler, 200, k, r);
      psi.push_back(m.psi);
      s.push_back(m.s2);
    }
    return std::pair{psi, s};
  };
  const auto [psi4, s4] = run(4);
  const auto [psi8, s8] = run(8);
  std::vector<double> se4;
  for (double v : s4) se4.push_back(std::sqrt(v));
  const double ratio = oracle::sd(psi4) / oracle::mean(se4);
  out.require(ratio >= 0.6 && ratio <= 1.7, "sd(psi) / mean(s) " + fmt("%.3f", ratio));
  const double halving = oracle::mean(s8) / oracle::mean(s4);
  out.require(halving >= 0.35 && halving <= 0.65, "s2(2K) / s2(K) " + fmt("%.3f", halving));
  return out;
}

Outcome mediation_oracle() {
  Outcome out;
  const auto sim = simulate("mediation_linear", 1000, 2, 71, {{"gamma", 1.0}, {"beta", 0.5}, {"lambda", 2.0}});
  RngStream rng(701, 0);
  auto prop = std::make_shared<const PropensityModel>(fit_propensity(sim.data, PropensityConfig{}, rng));
  BartConfig c;
  c.burn_in = 500;
  c.n_draws = 300;
  const MediationModels models = fit_mediation_models(sim.data, prop, c, rng);
  const BootstrapLaw law(bb_posterior(sim.data.x));
  const MediationResult r = mediation_effects(*models.outcome, *models.mediator, law, 1000, 2, rng);
  auto within = [&](const EstimandResult& e, double truth) {
    const bool ok = std::abs(e.estimate - truth) < 3.0 * e.posterior_sd();
    out.require(ok, e.name + " " + fmt("%.3f", e.estimate) + " sd " + fmt("%.3f", e.posterior_sd()));
  };
  within(r.delta0, 2.0);
  within(r.delta1, 2.0);
  within(r.zeta0, 0.5);
  within(r.zeta1, 0.5);

  using testing_models::LinearMediatedOutcome;
  using testing_models::LinearMediator;
  const LinearMediator no_a_to_m(100, 2, 0.0, 0.5, 1.0);
  const LinearMediatedOutcome with_m(100, 2, 0.5, 2.0);
  const LinearMediator a_to_m(100, 2, 1.0, 0.5, 1.0);
  const LinearMediatedOutcome no_m_to_y(100, 2, 0.5, 0.0);
  for (const auto& [med, outm, label] : {std::tuple{&no_a_to_m, &with_m, "gamma=0"}, std::tuple{&a_to_m, &no_m_to_y, "lambda=0"}}) {
    RngStream r2(702, 0);
    const MediationResult z = mediation_effects(*outm, *med, law, 1000, 2, r2);
    for (const EstimandResult* e : {&z.delta0, &z.delta1}) {
      const bool ok = std::abs(e->estimate) <= 3.0 * e->mc_se + 1e-12;
      out.require(ok, std::string(label) + " " + e->name + " " + fmt("%.2e", e->estimate) + " mc_se " + fmt("%.2e", e->mc_se));
    }
  }
  return out;
}

Outcome rdd_coverage() {
  Outcome out;
  RddConfig c;
  c.level = 0.9;
  for (double jump : {2.0, 0.0}) {
    int covered = 0;
    for (int rep = 0; rep < 100; ++rep) {
      const auto sim = simulate("rdd_jump", 500, 1, 8000 + static_cast<std::uint64_t>(rep), {{"jump", jump}, {"noise_sd", 0.5}});
      RngStream rng(801, static_cast<std::uint64_t>(rep));
      const RddResult r = rdd_fit(sim.data, c, rng);
      covered += (r.effect.ci_lower <= jump && jump <= r.effect.ci_upper) ? 1 : 0;
    }
    out.require(covered >= 80, "jump " + fmt("%.0f", jump) + " covered " + std::to_string(covered) + "/100");
  }
  return out;
}

Outcome quantile_effects() {
  Outcome out;
  const auto sim = simulate("homogeneous_bcf", 500, 5, 91, {{"effect", 1.0}});
  RngStream rng(901, 0);
  auto prop = std::make_shared<const PropensityModel>(fit_propensity(sim.data, PropensityConfig{}, rng));
  BcfConfig c;
  c.n_draws = 500;
  const BcfFit fit = fit_bcf(sim.data, prop, c, rng);
  const BootstrapLaw law(bb_posterior(sim.data.x));
  const auto m = median_effect(fit, law, 500, 10, rng);
  out.require(std::abs(m.estimate - 1.0) < 3.0 * m.posterior_sd(),
              "median effect " + fmt("%.3f", m.estimate) + " sd " + fmt("%.3f", m.posterior_sd()));

  const testing_models::FnOutcome same(200, 5, [](std::size_t, double, std::span<const double> x) { return 1.0 + x[0] + x[1]; });
  const auto z = median_effect(same, law, 500, 10, rng);
  out.require(std::abs(z.estimate) <= 3.0 * z.mc_se + 1e-12,
              "identical arms " + fmt("%.2e", z.estimate) + " mc_se " + fmt("%.2e", z.mc_se));
  return out;
}

Outcome mixture_machinery() {
  Outcome out;
  RngStream rng(1001, 0);
  std::vector<double> w1, w2;
  for (int i = 0; i < 100000; ++i) {
    std::vector<double> raw(30);
    for (auto& r : raw) r = sample_beta(1.0, 1.0, rng);
    raw.back() = 1.0;
    const auto s = stick_break(raw);
    w1.push_back(s[0]);
    w2.push_back(s[1]);
  }
  out.require(std::abs(oracle::mean(w1) - 0.5) < 3.0 * oracle::mc_se(w1), "E[w1] " + fmt("%.4f", oracle::mean(w1)));
  out.require(std::abs(oracle::mean(w2) - 0.25) < 3.0 * oracle::mc_se(w2), "E[w2] " + fmt("%.4f", oracle::mean(w2)));

  const auto counts = simulate_cluster_counts(1.0, 100, 200, 4000, rng);
  const std::vector<double> cc(counts.begin(), counts.end());
  const double formula = expected_cluster_count(1.0, 100);
  const double rel = std::abs(oracle::mean(cc) - formula) / formula;
  out.require(rel < 0.15, "cluster count " + fmt("%.3f", oracle::mean(cc)) + " vs " + fmt("%.3f", formula) + " rel " +
                              fmt("%.3f", rel));

  MatrixXd x(400, 1);
  for (int i = 0; i < 400; ++i) x(i, 0) = (i % 2 ? 5.0 : -5.0) + rng.normal();
  ImmConfig c;
  c.truncation = 20;
  c.burn_in = 200;
  c.n_draws = 200;
  const ImmFit fit = imm_fit(x, c, rng);
  double l1 = 0.0;
  const double h = 0.02;
  for (double t = -12.0; t <= 12.0; t += h) {
    const std::vector<double> pt{t};
    double f = 0.0;
    for (const auto& d : fit.draws) f += std::exp(d.log_density(pt));
    f /= static_cast<double>(fit.draws.size());
    const double truth = 0.5 * std::exp(log_normal_pdf(t, 5, 1)) + 0.5 * std::exp(log_normal_pdf(t, -5, 1));
    l1 += std::abs(f - truth) * h;
  }
  out.require(l1 < 0.15, "IMM L1 " + fmt("%.4f", l1));

  StickBreakingMixture m;
  m.weights = {0.2, 0.5, 0.3};
  m.sticks = {0.2, 0.625, 1.0};
  m.kinds = {ColumnKind::Continuous, ColumnKind::Continuous};
  m.loc.resize(3, 2);
  m.loc << -2.0, -1.0, 0.0, 0.5, 2.0, 3.0;
  m.scale2.resize(3, 2);
  m.scale2 << 1.0, 0.5, 0.8, 1.0, 1.2, 0.3;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<double> current{0.3, 0.0};
  const std::vector<char> missing{0, 1};
  const std::vector<double> xo{0.3, nan};
  const auto post = m.class_posterior(xo);
  // Chi-square goodness of fit against the conditional mixture CDF on 20 equiprobable bins.
  auto cdf = [&](double v) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) s += post[static_cast<std::size_t>(k)] * normal_cdf((v - m.loc(k, 1)) / std::sqrt(m.scale2(k, 1)));
    return s;
  };
  const int n = 20000, bins = 20;
  std::vector<double> hist(bins, 0.0);
  for (int i = 0; i < n; ++i) {
    const auto v = imm_impute_mh(m, current, missing, [](std::span<const double>) { return 1.0; }, rng);
    hist[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>(cdf(v[1]) * bins)))] += 1.0;
  }
  double stat = 0.0;
  const double expect = static_cast<double>(n) / bins;
  for (double o : hist) stat += (o - expect) * (o - expect) / expect;
  const double pval = oracle::chi2_sf(stat, bins - 1);
  out.require(pval > 0.01, "MH goodness of fit p " + fmt("%.3f", pval));
  return out;
}

std::string pipeline_records(const fs::path& root) {
  fs::remove_all(root);
  fs::create_directories(root);
  const auto sim = simulate("linear_confounded", 300, 5, 111);
  const fs::path csv = root / "data.csv";
  cli::write_dataset(csv, sim.data, cli::schema_for(sim.data));
  const Dataset data = cli::read_dataset(csv, cli::schema_for(sim.data));
  cli::RunConfig c;
  c.iterations = 800;
  c.burn_in = 300;
  c.chains = 2;
  c.seed = 42;
  c.estimands = {"pate", "sate", "att", "median"};
  c.k = 2;
  cli::run_fit(c, data, root / "store");
  return cli::records_json(cli::run_estimate(root / "store", cli::EstimateRequest{}));
}

Outcome determinism() {
  Outcome out;
  const fs::path tmp = fs::temp_directory_path();
  const std::string a = pipeline_records(tmp / "bnpc_accept_run1");
  const std::string b = pipeline_records(tmp / "bnpc_accept_run2");
  out.require(!a.empty() && a == b, std::to_string(a.size()) + " bytes per run, identical " + (a == b ? "yes" : "no"));
  return out;
}

struct Criterion {
  int id;
  const char* name;
  double limit_s;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "GP conjugacy oracle", 10.0, gp_conjugacy},
      {2, "spike-and-slab enumeration", 120.0, spike_slab_enumeration},
      {3, "prior dogmatism reproduction", 300.0, ric_reproduction},
      {4, "selection-bias identity", 5.0, selection_bias_identity},
      {5, "BCF PATE coverage", 1800.0, bcf_coverage},
      {6, "Monte Carlo SE calibration", 120.0, mc_se_calibration},
      {7, "mediation oracle", 600.0, mediation_oracle},
      {8, "RDD coverage", 1200.0, rdd_coverage},
      {9, "quantile effects", 300.0, quantile_effects},
      {10, "mixture machinery", 600.0, mixture_machinery},
      {11, "pipeline determinism", 300.0, determinism},
  };
  std::vector<int> wanted;
  for (int i = 1; i < argc; ++i) wanted.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && std::find(wanted.begin(), wanted.end(), c.id) == wanted.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    o.require(secs < c.limit_s, "runtime " + fmt("%.1f", secs) + " s (limit " + fmt("%.0f", c.limit_s) + " s)");
    std::printf("criterion %d %s: %s | %s\n", c.id, c.name, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
