#include "bnpc/cli/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace bnpc::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + v[i];
  return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T v{};
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || ptr != value.data() + value.size()) {
    throw Error(ErrorKind::ConfigError, "key '" + key + "': cannot parse '" + value + "'");
  }
  return v;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw Error(ErrorKind::ConfigError, "key '" + key + "': expected true or false");
}

void one_of(const std::string& key, const std::string& value, std::initializer_list<const char*> allowed) {
  for (const char* a : allowed) {
    if (value == a) return;
  }
  throw Error(ErrorKind::ConfigError, "key '" + key + "': unsupported value '" + value + "'");
}

}  // namespace

KeyValues parse_key_values(std::istream& is) {
  KeyValues kv;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw Error(ErrorKind::ConfigError, "line " + std::to_string(line_no) + ": empty key");
    kv[key] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues read_key_values(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorKind::IoError, "cannot open " + path.string());
  return parse_key_values(is);
}

void write_key_values(std::ostream& os, const KeyValues& kv) {
  for (const auto& [k, v] : kv) os << k << " = " << v << '\n';
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "model",     "iterations", "burn_in",   "chains",         "thin",           "seed",
      "estimands", "k",          "level",     "covariate_law",  "outcome",        "treatment",
      "mediator",  "running",    "covariates", "propensity",    "n_trees",        "tau_trees",
      "arm_noise", "selection",  "varpi",     "propensity_mode", "imm_truncation", "alpha",
      "bins"};
  return keys;
}

int RunConfig::k_for(const std::string& estimand) const {
  if (k > 0) return k;
  return (estimand == "pate_mc" || estimand == "pate") ? 1 : 10;
}

RunConfig RunConfig::from_key_values(const KeyValues& kv) {
  const auto& keys = config_keys();
  for (const auto& [key, value] : kv) {
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw Error(ErrorKind::ConfigError, "unknown configuration key '" + key + "'");
    }
  }
  RunConfig c;
  auto get = [&](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };
  if (auto v = get("model")) c.model = *v;
  if (auto v = get("iterations")) c.iterations = parse_number<int>("iterations", *v);
  if (auto v = get("burn_in")) c.burn_in = parse_number<int>("burn_in", *v);
  if (auto v = get("chains")) c.chains = parse_number<int>("chains", *v);
  if (auto v = get("thin")) c.thin = parse_number<int>("thin", *v);
  if (auto v = get("seed")) c.seed = parse_number<std::uint64_t>("seed", *v);
  if (auto v = get("estimands")) c.estimands = split_list(*v);
  if (auto v = get("k")) c.k = parse_number<int>("k", *v);
  if (auto v = get("level")) c.level = parse_number<double>("level", *v);
  if (auto v = get("covariate_law")) c.covariate_law = *v;
  if (auto v = get("outcome")) c.schema.outcome = *v;
  if (auto v = get("treatment")) c.schema.treatment = *v;
  if (auto v = get("mediator"); v && !v->empty()) c.schema.mediator = *v;
  if (auto v = get("running"); v && !v->empty()) c.schema.running = *v;
  if (auto v = get("covariates")) c.schema.covariates = split_list(*v);
  if (auto v = get("propensity")) c.propensity = *v;
  if (auto v = get("n_trees")) c.n_trees = parse_number<int>("n_trees", *v);
  if (auto v = get("tau_trees")) c.tau_trees = parse_number<int>("tau_trees", *v);
  if (auto v = get("arm_noise")) c.arm_noise = parse_bool("arm_noise", *v);
  if (auto v = get("selection")) c.selection = *v;
  if (auto v = get("varpi")) c.varpi = parse_number<double>("varpi", *v);
  if (auto v = get("propensity_mode")) c.propensity_mode = *v;
  if (auto v = get("imm_truncation")) c.imm_truncation = parse_number<int>("imm_truncation", *v);
  if (auto v = get("alpha")) c.alpha = parse_number<double>("alpha", *v);
  if (auto v = get("bins")) c.bins = parse_number<int>("bins", *v);
  c.validate();
  return c;
}

KeyValues RunConfig::to_key_values() const {
  KeyValues kv;
  kv["model"] = model;
  kv["iterations"] = std::to_string(iterations);
  kv["burn_in"] = std::to_string(burn_in);
  kv["chains"] = std::to_string(chains);
  kv["thin"] = std::to_string(thin);
  kv["seed"] = std::to_string(seed);
  kv["estimands"] = join(estimands);
  kv["k"] = std::to_string(k);
  kv["level"] = format_double(level);
  kv["covariate_law"] = covariate_law;
  kv["outcome"] = schema.outcome;
  kv["treatment"] = schema.treatment;
  kv["mediator"] = schema.mediator.value_or("");
  kv["running"] = schema.running.value_or("");
  kv["covariates"] = join(schema.covariates);
  kv["propensity"] = propensity;
  kv["n_trees"] = std::to_string(n_trees);
  kv["tau_trees"] = std::to_string(tau_trees);
  kv["arm_noise"] = arm_noise ? "true" : "false";
  kv["selection"] = selection;
  kv["varpi"] = format_double(varpi);
  kv["propensity_mode"] = propensity_mode;
  kv["imm_truncation"] = std::to_string(imm_truncation);
  kv["alpha"] = format_double(alpha);
  kv["bins"] = std::to_string(bins);
  return kv;
}

void RunConfig::validate() const {
  one_of("model", model, {"bcf", "bart", "gp", "sparse_shared", "sparse_horseshoe", "hahn_reparam", "imm"});
  one_of("covariate_law", covariate_law, {"bayesian_bootstrap", "imm"});
  one_of("propensity", propensity, {"probit_bart", "gp_probit", "none"});
  one_of("selection", selection, {"shared", "linked"});
  one_of("propensity_mode", propensity_mode, {"refresh", "prefit"});
  if (!(burn_in >= 0) || !(iterations > burn_in)) throw Error(ErrorKind::ConfigError, "need iterations > burn_in >= 0");
  if (chains < 1) throw Error(ErrorKind::ConfigError, "chains must be >= 1");
  if (thin < 1) throw Error(ErrorKind::ConfigError, "thin must be >= 1");
  if (n_draws() < 1) throw Error(ErrorKind::ConfigError, "no draws are kept after burn-in and thinning");
  if (!(level > 0.0 && level < 1.0)) throw Error(ErrorKind::ConfigError, "level must lie in (0, 1)");
  if (k < 0) throw Error(ErrorKind::ConfigError, "k must be >= 0");
  if (n_trees < 1 || tau_trees < 1) throw Error(ErrorKind::ConfigError, "tree counts must be >= 1");
  if (!(varpi >= 1.0)) throw Error(ErrorKind::ConfigError, "varpi must be >= 1");
  if (imm_truncation < 2) throw Error(ErrorKind::ConfigError, "imm_truncation must be >= 2");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(ErrorKind::ConfigError, "alpha must lie in (0, 1)");
  if (bins < 1) throw Error(ErrorKind::ConfigError, "bins must be >= 1");
  if (model == "bcf" && propensity == "none") {
    throw Error(ErrorKind::ConfigError, "the bcf model needs a propensity method");
  }
}

}  // namespace bnpc::cli
