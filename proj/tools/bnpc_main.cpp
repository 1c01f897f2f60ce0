#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "bnpc/causal/selection_bias.hpp"
#include "bnpc/cli/config.hpp"
#include "bnpc/cli/csv_io.hpp"
#include "bnpc/cli/dgp.hpp"
#include "bnpc/cli/pipeline.hpp"
#include "bnpc/errors.hpp"

namespace {

using namespace bnpc;
using namespace bnpc::cli;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

std::pair<std::string, std::string> split_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos) throw Error(ErrorKind::ConfigError, "expected key=value, got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

/// Flags that map onto configuration keys; unset flags leave the file value alone.
struct ConfigFlags {
  std::string config_path;
  std::vector<std::string> set;
  std::map<std::string, std::string> direct;

  void add(CLI::App* app) {
    app->add_option("-c,--config", config_path, "key = value configuration file");
    app->add_option("--set", set, "override any configuration key (key=value, repeatable)");
    for (const char* key : {"model", "iterations", "burn_in", "chains", "thin", "seed", "estimands", "k", "level",
                            "covariate_law", "outcome", "treatment", "mediator", "running", "covariates", "propensity",
                            "n_trees", "tau_trees", "arm_noise", "selection", "varpi", "propensity_mode",
                            "imm_truncation", "alpha", "bins"}) {
      std::string flag = std::string("--") + key;
      for (auto& ch : flag) {
        if (ch == '_') ch = '-';
      }
      app->add_option_function<std::string>(flag, [this, k = std::string(key)](const std::string& v) { direct[k] = v; },
                                             std::string("configuration key ") + key);
    }
  }

  RunConfig resolve() const {
    KeyValues kv;
    if (!config_path.empty()) kv = read_key_values(config_path);
    for (const auto& [k, v] : direct) kv[k] = v;
    for (const auto& s : set) {
      auto [k, v] = split_assignment(s);
      kv[k] = v;
    }
    RunConfig c = RunConfig::from_key_values(kv);
    c.validate();
    return c;
  }
};

void emit(const std::string& text, const std::string& out) {
  if (out.empty() || out == "-") {
    std::cout << text;
    return;
  }
  std::ofstream os(out);
  if (!os) throw Error(ErrorKind::IoError, "cannot write " + out);
  os << text;
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConfigError, "'" + item + "' is not a number");
    }
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian nonparametric causal inference"};
  app.require_subcommand(1);

  // simulate
  auto* sim = app.add_subcommand("simulate", "generate a synthetic dataset with its ground truth");
  DgpSpec spec;
  std::vector<std::string> dgp_params;
  std::string sim_out = "-";
  std::string truth_out;
  sim->add_option("--dgp", spec.name, "data-generating process")->check(CLI::IsMember(dgp_names()));
  sim->add_option("-n,--n", spec.n, "rows");
  sim->add_option("-p,--p", spec.p, "covariates");
  sim->add_option("--seed", spec.seed, "seed");
  sim->add_option("--param", dgp_params, "DGP parameter override (key=value, repeatable)");
  sim->add_option("-o,--out", sim_out, "CSV output path");
  sim->add_option("--truth", truth_out, "ground-truth JSON output path");

  // fit
  auto* fit = app.add_subcommand("fit", "fit a model and write a posterior store");
  ConfigFlags fit_flags;
  fit_flags.add(fit);
  std::string fit_data;
  std::string fit_store;
  std::optional<int> stop_after;
  bool resume = false;
  fit->add_option("-d,--data", fit_data, "input CSV")->required();
  fit->add_option("-s,--store", fit_store, "posterior store directory")->required();
  fit->add_option("--stop-after", stop_after, "checkpoint and stop after this many iterations");
  fit->add_flag("--resume", resume, "continue from the checkpoint in the store");

  // estimate
  auto* est = app.add_subcommand("estimate", "summarize causal estimands from a posterior store");
  EstimateRequest req;
  std::string est_store;
  std::string est_out = "-";
  std::string est_x;
  std::string draws_prefix;
  est->add_option("-s,--store", est_store, "posterior store directory")->required();
  est->add_option("-e,--estimand", req.estimands,
                  "cate, sate, pate, pate_mc, att, subgroup, quantile, median, mediation (repeatable)");
  est->add_option("--seed", req.seed, "seed for the estimand evaluation");
  est->add_option("-k,--k", req.k, "Monte Carlo replicates per unit");
  est->add_option("--level", req.level, "credible level");
  est->add_option("--law", req.law, "covariate law: bayesian_bootstrap or imm");
  est->add_option("--alpha", req.alpha, "quantile level for the quantile estimand");
  est->add_option("--bins", req.bins, "histogram bins");
  est->add_option("--x", est_x, "CATE query point, comma separated");
  est->add_option("--subgroup", req.subgroup, "predicate such as \"x1 > 0 & x2 <= 1\"");
  est->add_option("--draws-prefix", draws_prefix, "write draws to <prefix>_<estimand>.txt");
  est->add_option("-o,--out", est_out, "output path for the records");

  // mediate
  auto* med = app.add_subcommand("mediate", "natural direct and indirect effects");
  ConfigFlags med_flags;
  med_flags.add(med);
  std::string med_data;
  std::string med_out = "-";
  med->add_option("-d,--data", med_data, "input CSV")->required();
  med->add_option("-o,--out", med_out, "output path for the records");

  // rdd
  auto* rdd = app.add_subcommand("rdd", "sharp regression discontinuity effect at the cutoff");
  ConfigFlags rdd_flags;
  rdd_flags.add(rdd);
  std::string rdd_data;
  std::string rdd_out = "-";
  double cutoff = 0.0;
  int rdd_draws = 1000;
  rdd->add_option("-d,--data", rdd_data, "input CSV")->required();
  rdd->add_option("--cutoff", cutoff, "cutoff on the running variable");
  rdd->add_option("--draws", rdd_draws, "posterior draws");
  rdd->add_option("-o,--out", rdd_out, "output path for the record");

  // diagnose
  auto* diag = app.add_subcommand("diagnose", "prior dogmatism (ric) or overlap diagnostics");
  diag->require_subcommand(1);
  auto* ric = diag->add_subcommand("ric", "prior SD of the selection bias as P grows");
  RicConfig ric_cfg;
  std::uint64_t ric_seed = 1;
  std::string diag_out = "-";
  ric->add_option("--p", ric_cfg.p_values, "covariate counts (repeatable)");
  ric->add_option("--draws", ric_cfg.n_draws, "prior draws per P");
  ric->add_option("--atoms", ric_cfg.n_atoms, "uniform covariate atoms");
  ric->add_option("--trees", ric_cfg.n_trees, "trees per forest");
  ric->add_option("--seed", ric_seed, "seed");
  ric->add_option("-o,--out", diag_out, "output path");
  auto* ovl = diag->add_subcommand("overlap", "flag units with extreme estimated propensity");
  std::string ovl_store;
  double epsilon = 0.01;
  ovl->add_option("-s,--store", ovl_store, "posterior store directory")->required();
  ovl->add_option("--epsilon", epsilon, "flag e < epsilon or e > 1 - epsilon");
  ovl->add_option("-o,--out", diag_out, "output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitValidation;
  }

  try {
    if (*sim) {
      for (const auto& s : dgp_params) {
        auto [k, v] = split_assignment(s);
        spec.params[k] = parse_list(v).at(0);
      }
      const Simulation s = simulate(spec);
      std::ostringstream os;
      write_dataset(os, s.data, schema_for(s.data));
      emit(os.str(), sim_out);
      if (!truth_out.empty()) {
        nlohmann::ordered_json j;
        j["dgp"] = spec.name;
        j["n"] = spec.n;
        j["p"] = spec.p;
        j["seed"] = spec.seed;
        j["method"] = s.truth.method;
        j["truth"] = s.truth.values;
        emit(j.dump(2) + "\n", truth_out);
      }
    } else if (*fit) {
      const RunConfig c = fit_flags.resolve();
      const Dataset d = read_dataset(fit_data, c.schema);
      FitOptions opt;
      opt.stop_after = stop_after;
      opt.resume = resume;
      const FitStatus st = run_fit(c, d, fit_store, opt);
      std::cerr << (st == FitStatus::Complete ? "fit complete: " : "checkpoint written: ") << fit_store << '\n';
    } else if (*est) {
      if (!est_x.empty()) req.x = parse_list(est_x);
      if (!draws_prefix.empty()) req.draws_prefix = draws_prefix;
      emit(records_json(run_estimate(est_store, req)), est_out);
    } else if (*med) {
      RunConfig c = med_flags.resolve();
      if (!c.schema.mediator) c.schema.mediator = "m";
      const Dataset d = read_dataset(med_data, c.schema);
      emit(records_json(run_mediate(c, d)), med_out);
    } else if (*rdd) {
      RunConfig c = rdd_flags.resolve();
      if (!c.schema.running) throw Error(ErrorKind::ConfigError, "rdd needs --running naming the running variable");
      const Dataset d = read_dataset(rdd_data, c.schema);
      emit(record_json(run_rdd(d, cutoff, rdd_draws, c.level, c.seed)) + "\n", rdd_out);
    } else if (*ric) {
      RngStream rng(ric_seed, 0);
      emit(ric_report_json(ric_prior_diagnostic(ric_cfg, rng), ric_seed) + "\n", diag_out);
    } else if (*ovl) {
      emit(overlap_report_json(store_overlap(ovl_store, epsilon)) + "\n", diag_out);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return is_numerical(e.kind()) ? kExitNumerical : kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return 0;
}
