#include "bnpc/cli/store.hpp"

#include <openssl/evp.h>

#include <array>
#include <fstream>
#include <iomanip>
#include <memory>
#include <sstream>

#include <json.hpp>

namespace bnpc::cli {

std::string sha256_hex(const fs::path& file) {
  std::ifstream is(file, std::ios::binary);
  if (!is) throw Error(ErrorKind::IoError, "cannot open " + file.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw Error(ErrorKind::IoError, "SHA-256 unavailable");
  std::array<char, 1 << 16> buf{};
  while (is) {
    is.read(buf.data(), buf.size());
    const auto got = is.gcount();
    if (got > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(got));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  return hex.str();
}

double LinearOutcome::mean(std::size_t b, double a, std::span<const double> x) const {
  const LinearDraw& d = draws_[b];
  double m = d.intercept + d.beta_a * a;
  double eta = d.alpha0;
  for (std::size_t j = 0; j < x.size(); ++j) {
    m += d.beta(static_cast<Eigen::Index>(j)) * x[j];
    if (d.alpha.size() > 0) eta += d.alpha(static_cast<Eigen::Index>(j)) * x[j];
  }
  if (d.alpha.size() > 0) m += d.beta_e * eta;
  return m;
}

namespace {

void write_vec(std::ostream& os, const VectorXd& v) {
  os << v.size();
  for (Eigen::Index i = 0; i < v.size(); ++i) os << ' ' << v(i);
  os << '\n';
}

VectorXd read_vec(std::istream& is) {
  Eigen::Index n = 0;
  if (!(is >> n) || n < 0) throw Error(ErrorKind::ParseError, "bad vector length");
  VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(is >> v(i))) throw Error(ErrorKind::ParseError, "truncated vector");
  }
  return v;
}

void expect(std::istream& is, const std::string& tag) {
  std::string t;
  if (!(is >> t) || t != tag) throw Error(ErrorKind::ParseError, "expected '" + tag + "' record");
}

}  // namespace

std::size_t read_header(std::istream& is, const std::string& tag) {
  std::string t;
  std::size_t n = 0;
  if (!(is >> t >> n) || t != tag) throw Error(ErrorKind::ParseError, "expected '" + tag + "' header");
  return n;
}

void write_bcf_draw(std::ostream& os, const BcfDraw& d) {
  os << std::setprecision(17) << "draw " << d.sigma0 << ' ' << d.sigma1 << '\n';
  write_forest(os, d.mu);
  write_forest(os, d.tau);
}

BcfDraw read_bcf_draw(std::istream& is) {
  BcfDraw d;
  expect(is, "draw");
  if (!(is >> d.sigma0 >> d.sigma1)) throw Error(ErrorKind::ParseError, "bad BCF draw");
  d.mu = read_forest(is);
  d.tau = read_forest(is);
  return d;
}

void write_bart_draw(std::ostream& os, const BartForest& f, double sigma) {
  os << std::setprecision(17) << "draw " << sigma << '\n';
  write_forest(os, f);
}

std::pair<BartForest, double> read_bart_draw(std::istream& is) {
  expect(is, "draw");
  double sigma = 0.0;
  if (!(is >> sigma)) throw Error(ErrorKind::ParseError, "bad BART draw");
  BartForest f = read_forest(is);
  return {std::move(f), sigma};
}

void write_linear_draw(std::ostream& os, const LinearDraw& d) {
  os << std::setprecision(17) << "draw " << d.intercept << ' ' << d.beta_a << ' ' << d.beta_e << ' ' << d.alpha0 << ' '
     << d.noise_sd << '\n';
  write_vec(os, d.alpha);
  write_vec(os, d.beta);
}

LinearDraw read_linear_draw(std::istream& is) {
  LinearDraw d;
  expect(is, "draw");
  if (!(is >> d.intercept >> d.beta_a >> d.beta_e >> d.alpha0 >> d.noise_sd)) {
    throw Error(ErrorKind::ParseError, "bad linear draw");
  }
  d.alpha = read_vec(is);
  d.beta = read_vec(is);
  return d;
}

void write_mixture(std::ostream& os, const StickBreakingMixture& m) {
  os << std::setprecision(17) << "mixture " << m.n_components() << ' ' << m.dim() << ' ' << m.alpha << '\n';
  for (double s : m.sticks) os << s << ' ';
  os << '\n';
  for (double w : m.weights) os << w << ' ';
  os << '\n';
  for (auto k : m.kinds) os << (k == ColumnKind::Binary ? 1 : 0) << ' ';
  os << '\n';
  for (Eigen::Index k = 0; k < m.loc.rows(); ++k) {
    for (Eigen::Index j = 0; j < m.loc.cols(); ++j) os << m.loc(k, j) << ' ' << m.scale2(k, j) << ' ';
    os << '\n';
  }
}

StickBreakingMixture read_mixture(std::istream& is) {
  StickBreakingMixture m;
  expect(is, "mixture");
  int k = 0;
  int p = 0;
  if (!(is >> k >> p >> m.alpha) || k < 1 || p < 0) throw Error(ErrorKind::ParseError, "bad mixture header");
  m.sticks.resize(static_cast<std::size_t>(k));
  m.weights.resize(static_cast<std::size_t>(k));
  for (auto& s : m.sticks) {
    if (!(is >> s)) throw Error(ErrorKind::ParseError, "truncated sticks");
  }
  for (auto& w : m.weights) {
    if (!(is >> w)) throw Error(ErrorKind::ParseError, "truncated weights");
  }
  for (int j = 0; j < p; ++j) {
    int b = 0;
    if (!(is >> b)) throw Error(ErrorKind::ParseError, "truncated column kinds");
    m.kinds.push_back(b ? ColumnKind::Binary : ColumnKind::Continuous);
  }
  m.loc.resize(k, p);
  m.scale2.resize(k, p);
  for (int c = 0; c < k; ++c) {
    for (int j = 0; j < p; ++j) {
      if (!(is >> m.loc(c, j) >> m.scale2(c, j))) throw Error(ErrorKind::ParseError, "truncated component parameters");
    }
  }
  return m;
}

void write_manifest(const fs::path& dir, Manifest m, const std::vector<std::string>& files) {
  for (const auto& f : files) m.hashes[f] = sha256_hex(dir / f);
  nlohmann::ordered_json j;
  j["format"] = "bnpc-store-1";
  j["model"] = m.model;
  j["seed"] = m.seed;
  nlohmann::ordered_json chains = nlohmann::ordered_json::array();
  for (const auto& c : m.chains) chains.push_back({{"file", c.file}, {"stream", c.stream}, {"n_draws", c.n_draws}});
  j["chains"] = chains;
  nlohmann::ordered_json hashes = nlohmann::ordered_json::object();
  for (const auto& [f, h] : m.hashes) hashes[f] = h;
  j["sha256"] = hashes;
  std::ofstream os(dir / "manifest.json");
  if (!os) throw Error(ErrorKind::IoError, "cannot write manifest");
  os << j.dump(2) << '\n';
}

Manifest read_manifest(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) throw Error(ErrorKind::IoError, "no manifest in " + dir.string() + " (fit incomplete?)");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
    Manifest m;
    m.model = j.at("model").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& c : j.at("chains")) {
      m.chains.push_back({c.at("file").get<std::string>(), c.at("stream").get<std::uint64_t>(), c.at("n_draws").get<int>()});
    }
    for (const auto& [f, h] : j.at("sha256").items()) m.hashes[f] = h.get<std::string>();
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("bad manifest: ") + e.what());
  }
}

}  // namespace bnpc::cli
