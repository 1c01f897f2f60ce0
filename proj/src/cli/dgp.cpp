#include "bnpc/cli/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace bnpc::cli {

namespace {

int min_p(const std::string& name) {
  if (name == "rdd_jump") return 1;
  if (name == "mediation_linear") return 2;
  return 5;
}

MatrixXd normal_design(int n, int p, RngStream& rng) {
  MatrixXd x(n, p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = rng.normal();
  }
  return x;
}

double bernoulli(double prob, RngStream& rng) { return rng.uniform() < prob ? 1.0 : 0.0; }

void name_columns(Dataset& d) {
  d.covariate_names.clear();
  for (Eigen::Index j = 0; j < d.x.cols(); ++j) d.covariate_names.push_back("x" + std::to_string(j + 1));
}

}  // namespace

double DgpSpec::param(const std::string& key, double fallback) const {
  const auto it = params.find(key);
  return it == params.end() ? fallback : it->second;
}

const std::vector<std::string>& dgp_names() {
  static const std::vector<std::string> names{"linear_confounded", "friedman",         "homogeneous_bcf", "null_effect",
                                              "mediation_linear",  "rdd_jump",         "highdim_sparse"};
  return names;
}

void DgpSpec::validate() const {
  const auto& names = dgp_names();
  if (std::find(names.begin(), names.end(), name) == names.end()) throw Error(ErrorKind::ConfigError, "unknown DGP '" + name + "'");
  if (n < 20) throw Error(ErrorKind::ConfigError, "DGP needs n >= 20");
  if (p < min_p(name)) throw Error(ErrorKind::ConfigError, name + " needs p >= " + std::to_string(min_p(name)));
  if (!(param("noise_sd", 1.0) > 0.0)) throw Error(ErrorKind::ConfigError, "noise_sd must be > 0");
}

Simulation simulate(const DgpSpec& spec) {
  spec.validate();
  RngStream rng(spec.seed, 0x5eed);
  Simulation s;
  Dataset& d = s.data;
  const int n = spec.n;
  const int p = spec.p;
  const double sd = spec.param("noise_sd", spec.name == "rdd_jump" ? 0.5 : 1.0);
  d.y.resize(n);
  d.a.resize(n);
  s.truth.method = "analytic";

  if (spec.name == "linear_confounded") {
    // Outcome and assignment share the x1 - x2 direction.
    const double tau = spec.param("effect", 1.5);
    d.x = normal_design(n, p, rng);
    for (int i = 0; i < n; ++i) {
      const double x1 = d.x(i, 0), x2 = d.x(i, 1), x3 = d.x(i, 2), x4 = d.x(i, 3), x5 = d.x(i, 4);
      d.a(i) = bernoulli(normal_cdf(0.8 * (x1 - x2) + 0.3 * x3), rng);
      d.y(i) = 1.0 + tau * d.a(i) + 2.0 * (x1 - x2) + x3 + 0.5 * x4 - 0.5 * x5 + sd * rng.normal();
    }
    s.truth.values["pate"] = tau;
  } else if (spec.name == "friedman") {
    d.x.resize(n, p);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) d.x(i, j) = rng.uniform();
    }
    for (int i = 0; i < n; ++i) {
      const double x1 = d.x(i, 0), x2 = d.x(i, 1), x3 = d.x(i, 2), x4 = d.x(i, 3), x5 = d.x(i, 4);
      const double f = 10.0 * std::sin(std::numbers::pi * x1 * x2) + 20.0 * (x3 - 0.5) * (x3 - 0.5) + 10.0 * x4 + 5.0 * x5;
      d.a(i) = bernoulli(spec.param("rate", 0.5), rng);
      d.y(i) = f + (1.0 + x1) * d.a(i) + sd * rng.normal();
    }
    s.truth.values["pate"] = 1.5;
  } else if (spec.name == "homogeneous_bcf" || spec.name == "null_effect") {
    const double tau = spec.name == "null_effect" ? 0.0 : spec.param("effect", 2.0);
    d.x = normal_design(n, p, rng);
    for (int i = 0; i < n; ++i) {
      double s5 = 0.0;
      for (int j = 0; j < 5; ++j) s5 += d.x(i, j);
      d.a(i) = bernoulli(normal_cdf(0.4 * s5), rng);
      d.y(i) = 1.0 + s5 + tau * d.a(i) + sd * rng.normal();
    }
    s.truth.values["pate"] = tau;
    s.truth.values["median_effect"] = tau;
  } else if (spec.name == "mediation_linear") {
    const double gamma = spec.param("gamma", 1.0);
    const double beta = spec.param("beta", 0.5);
    const double lambda = spec.param("lambda", 2.0);
    d.x = normal_design(n, p, rng);
    d.m = VectorXd(n);
    for (int i = 0; i < n; ++i) {
      const double x1 = d.x(i, 0), x2 = d.x(i, 1);
      d.a(i) = bernoulli(normal_cdf(0.5 * x1), rng);
      (*d.m)(i) = gamma * d.a(i) + 0.5 * x1 + rng.normal();
      d.y(i) = beta * d.a(i) + lambda * (*d.m)(i) + x1 + 0.5 * x2 + sd * rng.normal();
    }
    s.truth.values["delta"] = lambda * gamma;
    s.truth.values["zeta"] = beta;
    s.truth.values["total"] = beta + lambda * gamma;
  } else if (spec.name == "rdd_jump") {
    const double jump = spec.param("jump", 2.0);
    const double cutoff = spec.param("cutoff", 0.0);
    d.x.resize(n, p);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) d.x(i, j) = 2.0 * rng.uniform() - 1.0;
    }
    for (int i = 0; i < n; ++i) {
      const double r = d.x(i, 0);
      d.a(i) = r >= cutoff ? 1.0 : 0.0;
      d.y(i) = 0.5 + r - 0.6 * r * r + 0.8 * r * r * r + jump * d.a(i) + sd * rng.normal();
    }
    d.running = 0;
    s.truth.values["rdd_effect"] = jump;
    s.truth.values["cutoff"] = cutoff;
  } else {  // highdim_sparse
    const double tau = spec.param("effect", 1.0);
    d.x = normal_design(n, p, rng);
    for (int i = 0; i < n; ++i) {
      const double x1 = d.x(i, 0), x2 = d.x(i, 1), x3 = d.x(i, 2), x4 = d.x(i, 3), x5 = d.x(i, 4);
      d.a(i) = bernoulli(normal_cdf(0.5 * (x1 + x2 + x3) - 0.5 * x4), rng);
      d.y(i) = tau * d.a(i) + x1 + x2 + x3 + x5 + sd * rng.normal();
    }
    s.truth.values["pate"] = tau;
  }
  name_columns(d);
  d.validate();
  return s;
}

}  // namespace bnpc::cli
