#include "bnpc/cli/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "bnpc/bart.hpp"
#include "bnpc/causal/bcf.hpp"
#include "bnpc/causal/mediation.hpp"
#include "bnpc/causal/rdd.hpp"
#include "bnpc/cli/csv_io.hpp"
#include "bnpc/cli/store.hpp"
#include "bnpc/covariate_models.hpp"
#include "bnpc/gp.hpp"
#include "bnpc/kernels.hpp"
#include "bnpc/sparse_linear.hpp"

namespace bnpc::cli {

namespace {

constexpr std::uint64_t kPropensityStream = 1000;
constexpr std::uint64_t kImmStream = 1001;
constexpr std::uint64_t kMediationStream = 1002;
constexpr std::uint64_t kEstimateStream = 7;

const char* kData = "data.csv";
const char* kImputed = "data_imputed.csv";
const char* kConfig = "config.txt";
const char* kPropensity = "propensity.txt";
const char* kImm = "imm.txt";
const char* kGp = "gp.txt";

Schema store_schema(const Dataset& d) {
  Schema s;
  s.outcome = "outcome";
  s.treatment = "treatment";
  if (d.m) s.mediator = "mediator";
  s.covariates = d.covariate_names;
  if (s.covariates.empty()) {
    for (Eigen::Index j = 0; j < d.p(); ++j) s.covariates.push_back("x" + std::to_string(j + 1));
  }
  if (d.running) s.running = s.covariates[static_cast<std::size_t>(*d.running)];
  return s;
}

Schema store_read_schema(const RunConfig& c) {
  Schema s;
  s.outcome = "outcome";
  s.treatment = "treatment";
  if (c.schema.mediator) s.mediator = "mediator";
  s.running = c.schema.running;
  return s;
}

std::string chain_file(int c) { return "chain_" + std::to_string(c + 1) + ".txt"; }
std::string checkpoint_file(int c) { return "checkpoint_" + std::to_string(c + 1) + ".txt"; }

BartConfig bart_config(const RunConfig& c) {
  BartConfig b;
  b.n_trees = c.n_trees;
  b.burn_in = c.burn_in;
  b.n_draws = c.n_draws();
  b.thin = c.thin;
  return b;
}

BcfConfig bcf_config(const RunConfig& c) {
  BcfConfig b;
  b.mu_trees = c.n_trees;
  b.tau_trees = c.tau_trees;
  b.burn_in = c.burn_in;
  b.n_draws = c.n_draws();
  b.thin = c.thin;
  b.arm_noise = c.arm_noise;
  return b;
}

PropensityConfig propensity_config(const RunConfig& c) {
  PropensityConfig p;
  p.method = c.propensity == "gp_probit" ? PropensityMethod::GpProbit : PropensityMethod::ProbitBart;
  p.bart.burn_in = std::min(p.bart.burn_in, c.burn_in);
  p.bart.n_draws = std::min(p.bart.n_draws, c.n_draws());
  p.gp_burn_in = std::min(p.gp_burn_in, c.burn_in);
  p.gp_draws = std::min(p.gp_draws, c.n_draws());
  return p;
}

bool uses_propensity(const RunConfig& c) {
  return c.propensity != "none" && (c.model == "bcf" || c.model == "bart" || c.model == "gp");
}

struct Prepared {
  Dataset data;      // as given (may contain missing covariates)
  Dataset fit_data;  // covariates imputed when needed
  std::shared_ptr<const PropensityModel> prop;
  std::vector<StickBreakingMixture> mixtures;
};

Prepared prepare(const RunConfig& config, const Dataset& data, const fs::path& dir, std::vector<std::string>& files) {
  Prepared p;
  p.data = data;
  p.fit_data = data;
  const RngStream root(config.seed, 0);
  if (data.has_missing() && config.covariate_law != "imm") {
    throw Error(ErrorKind::MissingDataUnsupported, "covariates have missing entries; set covariate_law = imm");
  }
  if (config.covariate_law == "imm" || config.model == "imm") {
    ImmConfig ic;
    ic.truncation = config.imm_truncation;
    ic.burn_in = config.burn_in;
    ic.n_draws = config.n_draws();
    ic.thin = config.thin;
    RngStream r = root.split(kImmStream);
    ImmFit fit = imm_fit(data.x, ic, r);
    p.mixtures = std::move(fit.draws);
    if (!fit.imputed.empty()) {
      p.fit_data.x = fit.imputed.back();
      write_dataset(dir / kImputed, p.fit_data, store_schema(p.fit_data));
      files.push_back(kImputed);
    }
    std::ofstream os(dir / kImm);
    os << "imm_draws " << p.mixtures.size() << '\n';
    for (const auto& m : p.mixtures) write_mixture(os, m);
    files.push_back(kImm);
  }
  if (uses_propensity(config)) {
    RngStream r = root.split(kPropensityStream);
    p.prop = std::make_shared<const PropensityModel>(fit_propensity(p.fit_data, propensity_config(config), r));
    std::ofstream os(dir / kPropensity);
    p.prop->save(os);
    files.push_back(kPropensity);
  }
  return p;
}

Prepared load_prepared(const RunConfig& config, const fs::path& dir) {
  Prepared p;
  const Schema s = store_read_schema(config);
  p.data = read_dataset(dir / kData, s);
  p.fit_data = fs::exists(dir / kImputed) ? read_dataset(dir / kImputed, s) : p.data;
  if (fs::exists(dir / kPropensity)) {
    std::ifstream is(dir / kPropensity);
    p.prop = std::make_shared<const PropensityModel>(PropensityModel::load(is));
  }
  if (fs::exists(dir / kImm)) {
    std::ifstream is(dir / kImm);
    const std::size_t n = read_header(is, "imm_draws");
    for (std::size_t b = 0; b < n; ++b) p.mixtures.push_back(read_mixture(is));
  }
  return p;
}

bool kept(const RunConfig& c, int it) {
  if (it < c.burn_in || (it - c.burn_in) % c.thin != 0) return false;
  return (it - c.burn_in) / c.thin < c.n_draws();
}

template <class Chain, class Emit>
FitStatus run_checkpointed(Chain& chain, const fs::path& dir, int c, RngStream rng, const RunConfig& config,
                           const FitOptions& opt, const std::string& tag, Emit emit) {
  const fs::path draws = dir / chain_file(c);
  const fs::path ckpt = dir / checkpoint_file(c);
  int start = 0;
  std::ofstream os;
  if (opt.resume) {
    std::ifstream is(ckpt);
    if (!is) throw Error(ErrorKind::ConfigError, "no checkpoint to resume from in " + dir.string());
    std::string t;
    if (!(is >> t >> start) || t != "checkpoint") throw Error(ErrorKind::ParseError, "bad checkpoint header");
    std::string state;
    std::getline(is, state);
    std::getline(is, state);
    rng.set_state(state);
    chain.load(is);
    os.open(draws, std::ios::app);
  } else {
    os.open(draws, std::ios::trunc);
    os << tag << ' ' << config.n_draws() << '\n';
  }
  if (!os) throw Error(ErrorKind::IoError, "cannot write " + draws.string());
  for (int it = start; it < config.iterations; ++it) {
    try {
      chain.step(rng);
    } catch (const Error& e) {
      throw Error(e.kind(), "chain " + std::to_string(c + 1) + ", iteration " + std::to_string(it + 1) + ": " + e.what());
    }
    if (kept(config, it)) emit(os);
    if (opt.stop_after && it + 1 == *opt.stop_after && it + 1 < config.iterations) {
      os.flush();
      std::ofstream cs(ckpt, std::ios::trunc);
      cs << "checkpoint " << it + 1 << '\n' << rng.state() << '\n';
      chain.save(cs);
      return FitStatus::Interrupted;
    }
  }
  if (fs::exists(ckpt)) fs::remove(ckpt);
  return FitStatus::Complete;
}

LinearDraw from_shared(const SpikeSlabState& s) {
  LinearDraw d;
  d.intercept = s.intercept;
  d.beta_a = s.beta_a;
  d.beta_e = s.beta_e;
  d.alpha0 = s.alpha0;
  d.alpha = s.alpha;
  d.beta = s.beta;
  d.noise_sd = std::sqrt(s.noise_var);
  return d;
}

LinearDraw from_horseshoe(const HorseshoeState& s) {
  LinearDraw d;
  d.intercept = s.intercept;
  d.beta_a = s.forced(0);
  d.beta = s.beta;
  d.noise_sd = std::sqrt(s.noise_var);
  return d;
}

LinearDraw from_hahn(const HahnReparamState& s) {
  LinearDraw d;
  d.intercept = s.d0 - s.beta_a * s.c0;
  d.beta_a = s.beta_a;
  d.beta = s.beta_d - s.beta_a * s.beta_c;
  d.noise_sd = std::sqrt(s.noise_var);
  return d;
}

std::vector<LinearDraw> fit_linear(const RunConfig& config, const Dataset& data, RngStream& rng) {
  std::vector<LinearDraw> out;
  if (config.model == "sparse_shared") {
    SharedSpikeSlabConfig sc;
    sc.base.burn_in = config.burn_in;
    sc.base.n_draws = config.n_draws();
    sc.base.thin = config.thin;
    sc.selection = config.selection == "linked" ? Selection::Linked : Selection::Shared;
    sc.varpi = config.varpi;
    sc.propensity_mode = config.propensity_mode == "prefit" ? PropensityMode::Prefit : PropensityMode::Refresh;
    for (const auto& s : shared_spike_slab_gibbs(data.x, data.a, data.y, sc, rng).draws) out.push_back(from_shared(s));
  } else {
    HorseshoeConfig hc;
    hc.burn_in = config.burn_in;
    hc.n_draws = config.n_draws();
    hc.thin = config.thin;
    if (config.model == "sparse_horseshoe") {
      MatrixXd xa(data.n(), data.p() + 1);
      xa.col(0) = data.a;
      xa.rightCols(data.p()) = data.x;
      hc.n_forced = 1;
      for (const auto& s : horseshoe_gibbs(xa, data.y, hc, rng).draws) out.push_back(from_horseshoe(s));
    } else {
      for (const auto& s : hahn_reparam_fit(data.x, data.a, data.y, hc, rng).draws) out.push_back(from_hahn(s));
    }
  }
  return out;
}

std::string key_of(std::span<const double> x) {
  std::string k(x.size() * sizeof(double), '\0');
  if (!x.empty()) std::memcpy(k.data(), x.data(), k.size());
  return k;
}

/// Joint posterior draws of a GP over [a, x, (e_hat)] at both arms of every
/// covariate atom; queries away from the atoms are not supported.
class GpOutcome : public OutcomeModel {
 public:
  GpOutcome(const HyperFit& hyper, const MatrixXd& design, const VectorXd& y, const MatrixXd& atoms,
            const PropensityModel* prop, std::size_t n_draws, RngStream& rng)
      : p_(static_cast<int>(atoms.cols())), noise_sd_(std::sqrt(hyper.sigma2)) {
    const Eigen::Index j = atoms.rows();
    const Eigen::Index width = design.cols();
    MatrixXd q(2 * j, width);
    for (Eigen::Index r = 0; r < j; ++r) {
      std::vector<double> row(static_cast<std::size_t>(atoms.cols()));
      for (Eigen::Index c = 0; c < atoms.cols(); ++c) row[static_cast<std::size_t>(c)] = atoms(r, c);
      index_.emplace(key_of(row), static_cast<std::size_t>(r));
      for (int arm = 0; arm < 2; ++arm) {
        q(2 * r + arm, 0) = arm == 0 ? 1.0 : 0.0;
        q.block(2 * r + arm, 1, 1, atoms.cols()) = atoms.row(r);
        if (prop) q(2 * r + arm, width - 1) = clamp_propensity(prop->predict(row));
      }
    }
    const GpPosterior post(hyper.prior(), design, y, hyper.sigma2);
    const GpPrediction pred = post.predict(q);
    const MatrixXd cov = 0.5 * (pred.cov + pred.cov.transpose());
    const CholeskyFactor f = cholesky(cov);
    const MatrixXd l = f.lower();
    values_.resize(2 * j, static_cast<Eigen::Index>(n_draws));
    for (std::size_t b = 0; b < n_draws; ++b) {
      VectorXd z(2 * j);
      for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.normal();
      values_.col(static_cast<Eigen::Index>(b)) = pred.mean + l * z;
    }
  }

  std::size_t n_draws() const override { return static_cast<std::size_t>(values_.cols()); }
  int dim() const override { return p_; }
  double noise_sd(std::size_t, double) const override { return noise_sd_; }
  double mean(std::size_t b, double a, std::span<const double> x) const override {
    const auto it = index_.find(key_of(x));
    if (it == index_.end()) {
      throw Error(ErrorKind::IncompatibleEstimand, "the gp model answers queries at observed covariate rows only");
    }
    const auto row = static_cast<Eigen::Index>(2 * it->second + (a == 1.0 ? 0 : 1));
    return values_(row, static_cast<Eigen::Index>(b));
  }

 private:
  int p_;
  double noise_sd_;
  MatrixXd values_;
  std::unordered_map<std::string, std::size_t> index_;
};

MatrixXd gp_design(const Dataset& d, const PropensityModel* prop) { return bart_outcome_design(d.a, d.x, prop); }

std::vector<double> histogram_edges(const std::vector<double>& v, int bins) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  std::vector<double> edges(static_cast<std::size_t>(bins) + 1);
  const double width = (*hi - *lo) / bins;
  for (int i = 0; i <= bins; ++i) edges[static_cast<std::size_t>(i)] = *lo + width * i;
  edges.back() = *hi;
  return edges;
}

std::vector<std::string> read_chain_files(const Manifest& m) {
  std::vector<std::string> out;
  for (const auto& c : m.chains) out.push_back(c.file);
  return out;
}

std::unique_ptr<OutcomeModel> load_outcome(const fs::path& dir, const RunConfig& config, const Prepared& p,
                                           std::uint64_t seed) {
  const Manifest m = read_manifest(dir);
  const int pdim = static_cast<int>(p.fit_data.p());
  if (config.model == "imm") {
    throw Error(ErrorKind::IncompatibleEstimand, "an imm store holds a covariate model only; fit an outcome model");
  }
  if (config.model == "gp") {
    std::ifstream is(dir / kGp);
    std::string tag;
    HyperFit h;
    if (!(is >> tag >> h.rho >> h.sigma_g2 >> h.sigma2 >> h.mean) || tag != "gp") {
      throw Error(ErrorKind::ParseError, "bad gp store");
    }
    const auto post = bb_posterior(p.fit_data.x);
    RngStream r = RngStream(seed, kEstimateStream).split(0xa7);
    return std::make_unique<GpOutcome>(h, gp_design(p.fit_data, p.prop.get()), p.fit_data.y, post.atoms, p.prop.get(),
                                       static_cast<std::size_t>(config.n_draws()), r);
  }
  std::vector<BcfDraw> bcf;
  std::vector<BartForest> forests;
  std::vector<double> sigma;
  std::vector<LinearDraw> linear;
  for (const auto& file : read_chain_files(m)) {
    std::ifstream is(dir / file);
    if (!is) throw Error(ErrorKind::IoError, "missing draw file " + file);
    if (config.model == "bcf") {
      const std::size_t n = read_header(is, "bcf_draws");
      for (std::size_t b = 0; b < n; ++b) bcf.push_back(read_bcf_draw(is));
    } else if (config.model == "bart") {
      const std::size_t n = read_header(is, "bart_draws");
      for (std::size_t b = 0; b < n; ++b) {
        auto [f, s] = read_bart_draw(is);
        forests.push_back(std::move(f));
        sigma.push_back(s);
      }
    } else {
      const std::size_t n = read_header(is, "linear_draws");
      for (std::size_t b = 0; b < n; ++b) linear.push_back(read_linear_draw(is));
    }
  }
  if (config.model == "bcf") return std::make_unique<BcfFit>(std::move(bcf), p.prop, true, pdim);
  if (config.model == "bart") return std::make_unique<BartOutcome>(std::move(forests), std::move(sigma), p.prop, pdim);
  return std::make_unique<LinearOutcome>(std::move(linear), pdim);
}

std::unique_ptr<CovariateLaw> make_law(const std::string& law, const Prepared& p) {
  if (law == "imm") {
    if (p.mixtures.empty()) throw Error(ErrorKind::IncompatibleEstimand, "store has no imm covariate model");
    return std::make_unique<MixtureLaw>(p.mixtures);
  }
  if (law != "bayesian_bootstrap") throw Error(ErrorKind::ConfigError, "unknown covariate law '" + law + "'");
  return std::make_unique<BootstrapLaw>(bb_posterior(p.fit_data.x));
}

void write_draws(const fs::path& prefix, const SummaryRecord& r) {
  const fs::path file = prefix.string() + "_" + r.estimand + ".txt";
  std::ofstream os(file);
  if (!os) throw Error(ErrorKind::IoError, "cannot write " + file.string());
  for (double v : r.draws) os << format_double(v) << '\n';
}

}  // namespace

FitStatus run_fit(const RunConfig& config, const Dataset& data, const fs::path& store, const FitOptions& options) {
  config.validate();
  data.validate();
  if (options.stop_after && config.model != "bcf" && config.model != "bart") {
    throw Error(ErrorKind::ConfigError, "checkpointing is supported for the bcf and bart models");
  }
  if (options.stop_after && *options.stop_after < 1) throw Error(ErrorKind::ConfigError, "stop_after must be >= 1");
  fs::create_directories(store);
  std::vector<std::string> files{kData, kConfig};
  Prepared p;
  if (options.resume) {
    const KeyValues stored = read_key_values(store / kConfig);
    if (stored != config.to_key_values()) throw Error(ErrorKind::ConfigError, "resume configuration differs from the stored one");
    p = load_prepared(config, store);
    if (fs::exists(store / kImputed)) files.push_back(kImputed);
    if (fs::exists(store / kImm)) files.push_back(kImm);
    if (fs::exists(store / kPropensity)) files.push_back(kPropensity);
  } else {
    fs::remove(store / "manifest.json");
    write_dataset(store / kData, data, store_schema(data));
    {
      std::ofstream os(store / kConfig);
      write_key_values(os, config.to_key_values());
    }
    p = prepare(config, data, store, files);
  }
  const Dataset& d = p.fit_data;
  const RngStream root(config.seed, 0);
  Manifest manifest;
  manifest.model = config.model;
  manifest.seed = config.seed;

  if (config.model == "imm") {
    write_manifest(store, manifest, files);
    return FitStatus::Complete;
  }
  if (config.model == "gp") {
    if (d.n() > kMaxGpObservations) throw Error(ErrorKind::ConfigError, "gp model supports at most 5000 rows");
    const MatrixXd design = gp_design(d, p.prop.get());
    const HyperFit h = gp_optimize_hypers(design, d.y, HyperBounds::defaults_for(design, d.y));
    std::ofstream os(store / kGp);
    os << std::setprecision(17) << "gp " << h.rho << ' ' << h.sigma_g2 << ' ' << h.sigma2 << ' ' << h.mean << '\n';
    os.close();
    files.push_back(kGp);
    write_manifest(store, manifest, files);
    return FitStatus::Complete;
  }

  const auto statuses = kernels::map_index_omp(static_cast<std::size_t>(config.chains), [&](std::size_t ci) {
    const int c = static_cast<int>(ci);
    RngStream rng = root.split(ci + 1);
    if (config.model == "bcf") {
      BcfChain chain(d.x, d.a, d.y, p.prop->e_hat(), bcf_config(config));
      return run_checkpointed(chain, store, c, rng, config, options, "bcf_draws",
                              [&](std::ostream& os) { write_bcf_draw(os, chain.current()); });
    }
    if (config.model == "bart") {
      BartChain chain(bart_outcome_design(d.a, d.x, p.prop.get()), d.y, bart_config(config), BartChain::Kind::Continuous);
      return run_checkpointed(chain, store, c, rng, config, options, "bart_draws", [&](std::ostream& os) {
        write_bart_draw(os, chain.current_forest(), chain.current_sigma());
      });
    }
    const auto draws = fit_linear(config, d, rng);
    std::ofstream os(store / chain_file(c));
    os << "linear_draws " << draws.size() << '\n';
    for (const auto& ld : draws) write_linear_draw(os, ld);
    return FitStatus::Complete;
  });
  if (std::any_of(statuses.begin(), statuses.end(), [](FitStatus s) { return s == FitStatus::Interrupted; })) {
    return FitStatus::Interrupted;
  }
  for (int c = 0; c < config.chains; ++c) {
    manifest.chains.push_back({chain_file(c), static_cast<std::uint64_t>(c + 1), config.n_draws()});
    files.push_back(chain_file(c));
  }
  write_manifest(store, manifest, files);
  return FitStatus::Complete;
}

SummaryRecord make_record(const EstimandResult& r, std::uint64_t seed, int bins) {
  SummaryRecord s;
  s.estimand = r.name;
  s.estimate = r.estimate;
  s.ci_lower = r.ci_lower;
  s.ci_upper = r.ci_upper;
  s.level = r.level;
  s.mc_se = r.mc_se;
  s.n_draws = r.draws.size();
  s.seed = seed;
  s.mc_ok = r.mc_ok;
  s.warnings = r.warnings;
  s.draws = r.draws;
  if (!r.draws.empty()) {
    s.edges = histogram_edges(r.draws, bins);
    s.counts.assign(static_cast<std::size_t>(bins), 0);
    const double lo = s.edges.front();
    const double hi = s.edges.back();
    for (double v : r.draws) {
      int k = hi > lo ? static_cast<int>((v - lo) / (hi - lo) * bins) : 0;
      k = std::clamp(k, 0, bins - 1);
      ++s.counts[static_cast<std::size_t>(k)];
    }
  }
  return s;
}

std::string record_json(const SummaryRecord& r) {
  nlohmann::ordered_json j;
  j["estimand"] = r.estimand;
  j["estimate"] = r.estimate;
  j["ci_lower"] = r.ci_lower;
  j["ci_upper"] = r.ci_upper;
  j["level"] = r.level;
  j["mc_se"] = r.mc_se;
  j["n_draws"] = r.n_draws;
  j["seed"] = r.seed;
  j["mc_ok"] = r.mc_ok;
  j["histogram"] = {{"edges", r.edges}, {"counts", r.counts}};
  j["warnings"] = r.warnings;
  return j.dump();
}

std::string records_json(const std::vector<SummaryRecord>& rs) {
  std::string out;
  for (const auto& r : rs) out += record_json(r) + "\n";
  return out;
}

RowPredicate parse_predicate(const std::string& expr, const std::vector<std::string>& names) {
  struct Clause {
    std::size_t col;
    std::string op;
    double value;
  };
  std::vector<Clause> clauses;
  std::istringstream ss(expr);
  std::string part;
  while (std::getline(ss, part, '&')) {
    static const char* ops[] = {"<=", ">=", "==", "!=", "<", ">"};
    std::size_t pos = std::string::npos;
    std::string op;
    for (const char* o : ops) {
      pos = part.find(o);
      if (pos != std::string::npos) {
        op = o;
        break;
      }
    }
    if (pos == std::string::npos) throw Error(ErrorKind::ConfigError, "subgroup clause '" + part + "' has no comparison");
    auto trim = [](std::string s) {
      s.erase(0, s.find_first_not_of(" \t"));
      s.erase(s.find_last_not_of(" \t") + 1);
      return s;
    };
    const std::string name = trim(part.substr(0, pos));
    const std::string val = trim(part.substr(pos + op.size()));
    const auto it = std::find(names.begin(), names.end(), name);
    if (it == names.end()) throw Error(ErrorKind::ConfigError, "subgroup refers to unknown covariate '" + name + "'");
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConfigError, "subgroup value '" + val + "' is not a number");
    }
    clauses.push_back({static_cast<std::size_t>(it - names.begin()), op, v});
  }
  if (clauses.empty()) throw Error(ErrorKind::ConfigError, "empty subgroup expression");
  return [clauses](std::span<const double> x) {
    for (const auto& c : clauses) {
      const double v = x[c.col];
      bool ok = false;
      if (c.op == "<=") ok = v <= c.value;
      else if (c.op == ">=") ok = v >= c.value;
      else if (c.op == "==") ok = v == c.value;
      else if (c.op == "!=") ok = v != c.value;
      else if (c.op == "<") ok = v < c.value;
      else ok = v > c.value;
      if (!ok) return false;
    }
    return true;
  };
}

std::vector<SummaryRecord> run_mediate(const RunConfig& config, const Dataset& data) {
  config.validate();
  data.validate();
  if (!data.m) throw Error(ErrorKind::IncompatibleEstimand, "mediation requested but the data has no mediator column");
  if (data.has_missing()) throw Error(ErrorKind::MissingDataUnsupported, "mediation needs complete covariates");
  const RngStream root(config.seed, 0);
  std::shared_ptr<const PropensityModel> prop;
  if (config.propensity != "none") {
    RngStream r = root.split(kPropensityStream);
    prop = std::make_shared<const PropensityModel>(fit_propensity(data, propensity_config(config), r));
  }
  RngStream fr = root.split(kMediationStream);
  const MediationModels models = fit_mediation_models(data, prop, bart_config(config), fr);
  const BootstrapLaw law(bb_posterior(data.x));
  RngStream er(config.seed, kEstimateStream);
  const MediationResult res = mediation_effects(*models.outcome, *models.mediator, law, static_cast<int>(data.n()),
                                                config.k_for("mediation"), er, config.level);
  std::vector<SummaryRecord> out;
  for (const auto* r : {&res.zeta0, &res.zeta1, &res.delta0, &res.delta1, &res.total}) {
    out.push_back(make_record(*r, config.seed, config.bins));
  }
  return out;
}

std::vector<SummaryRecord> run_estimate(const fs::path& store, const EstimateRequest& request) {
  const RunConfig config = RunConfig::from_key_values(read_key_values(store / kConfig));
  const Prepared p = load_prepared(config, store);
  const std::uint64_t seed = request.seed.value_or(config.seed);
  const double level = request.level.value_or(config.level);
  const int bins = request.bins.value_or(config.bins);
  const std::string law_name = request.law.value_or(config.covariate_law);
  const double alpha = request.alpha.value_or(config.alpha);
  std::vector<std::string> wanted = request.estimands.empty() ? config.estimands : request.estimands;
  const Dataset& d = p.fit_data;

  std::vector<SummaryRecord> out;
  std::unique_ptr<OutcomeModel> model;
  auto outcome = [&]() -> const OutcomeModel& {
    if (!model) model = load_outcome(store, config, p, seed);
    return *model;
  };
  auto k_of = [&](const std::string& e) { return request.k.value_or(config.k_for(e)); };
  for (const auto& e : wanted) {
    RngStream rng(seed, kEstimateStream);
    EstimandResult r;
    if (e == "mediation") {
      if (!p.data.m) throw Error(ErrorKind::IncompatibleEstimand, "mediation requested but the data has no mediator column");
      RunConfig mc = config;
      mc.seed = seed;
      mc.level = level;
      mc.bins = bins;
      if (request.k) mc.k = *request.k;
      for (auto& rec : run_mediate(mc, d)) out.push_back(std::move(rec));
      continue;
    }
    const OutcomeModel& m = outcome();
    if (e == "cate") {
      if (request.x.empty()) throw Error(ErrorKind::ConfigError, "cate needs a query point (--x)");
      r = cate(m, request.x, level);
    } else if (e == "sate") {
      r = sate(m, d.x, level);
    } else if (e == "pate") {
      if (law_name == "bayesian_bootstrap") {
        r = pate_bb(m, bb_posterior(d.x), rng, level);
      } else {
        r = pate_mc(m, *make_law(law_name, p), static_cast<int>(d.n()), k_of("pate_mc"), rng, level);
      }
    } else if (e == "pate_mc") {
      r = pate_mc(m, *make_law(law_name, p), static_cast<int>(d.n()), k_of("pate_mc"), rng, level);
      r.name = "pate_mc";
    } else if (e == "quantile" || e == "median") {
      const double q = e == "median" ? 0.5 : alpha;
      r = quantile_effect(m, *make_law(law_name, p), q, static_cast<int>(d.n()), k_of("quantile"), rng, level);
    } else if (e == "att") {
      r = att(m, d, rng, level);
    } else if (e == "subgroup") {
      if (request.subgroup.empty()) throw Error(ErrorKind::ConfigError, "subgroup needs a predicate (--subgroup)");
      r = subgroup_effect(m, bb_posterior(d.x), parse_predicate(request.subgroup, d.covariate_names), rng, level);
    } else {
      throw Error(ErrorKind::ConfigError, "unknown estimand '" + e + "'");
    }
    out.push_back(make_record(r, seed, bins));
  }
  if (request.draws_prefix) {
    for (const auto& r : out) write_draws(*request.draws_prefix, r);
  }
  return out;
}

SummaryRecord run_rdd(const Dataset& data, double cutoff, int n_draws, double level, std::uint64_t seed) {
  RddConfig c;
  c.cutoff = cutoff;
  c.n_draws = n_draws;
  c.level = level;
  RngStream rng(seed, kEstimateStream);
  return make_record(rdd_fit(data, c, rng).effect, seed, 30);
}

std::string ric_report_json(const RicDiagnostic& d, std::uint64_t seed) {
  nlohmann::ordered_json j;
  j["kind"] = "ric";
  j["seed"] = seed;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& r : d.rows) rows.push_back({{"p", r.p}, {"sd", r.sd}, {"n_draws", r.delta.size()}});
  j["rows"] = rows;
  if (d.rows.size() >= 2) {
    j["decreasing"] = d.decreasing();
  } else {
    j["decreasing"] = nullptr;
  }
  return j.dump();
}

std::string overlap_report_json(const OverlapReport& r) {
  nlohmann::ordered_json j;
  j["kind"] = "overlap";
  j["epsilon"] = r.epsilon;
  j["n_violations"] = r.n_violations();
  j["below"] = r.below;
  j["above"] = r.above;
  j["message"] = r.message();
  return j.dump();
}

OverlapReport store_overlap(const fs::path& store, double epsilon) {
  const RunConfig config = RunConfig::from_key_values(read_key_values(store / kConfig));
  const Prepared p = load_prepared(config, store);
  if (!p.prop) throw Error(ErrorKind::IncompatibleEstimand, "store has no propensity model");
  return check_overlap(*p.prop, epsilon);
}

}  // namespace bnpc::cli
