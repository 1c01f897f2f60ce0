#include "bnpc/causal/selection_bias.hpp"

#include <cmath>

#include "bnpc/bart.hpp"
#include "bnpc/kernels.hpp"

namespace bnpc {

namespace {

struct Moments {
  double me = 0.0, mg = 0.0, ve = 0.0, vg = 0.0, cov = 0.0;
};

Moments law_moments(std::span<const double> e, std::span<const double> g, std::span<const double> w) {
  if (e.size() != g.size() || e.size() != w.size() || e.empty()) {
    throw Error(ErrorKind::DimensionMismatch, "e, g and weights must have the same nonzero length");
  }
  double wsum = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidParameter, "law weights must be finite and >= 0");
    wsum += v;
  }
  if (!(wsum > 0.0)) throw Error(ErrorKind::InvalidParameter, "law weights sum to zero");
  Moments m;
  for (std::size_t i = 0; i < e.size(); ++i) {
    m.me += w[i] * e[i];
    m.mg += w[i] * g[i];
  }
  m.me /= wsum;
  m.mg /= wsum;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const double de = e[i] - m.me;
    const double dg = g[i] - m.mg;
    m.ve += w[i] * de * de;
    m.vg += w[i] * dg * dg;
    m.cov += w[i] * de * dg;
  }
  m.ve /= wsum;
  m.vg /= wsum;
  m.cov /= wsum;
  if (!(m.me > 0.0)) throw Error(ErrorKind::ZeroTreatmentMass, "E{e(X)} must be positive");
  return m;
}

}  // namespace

double selection_bias(std::span<const double> e, std::span<const double> g1, std::span<const double> w) {
  const Moments m = law_moments(e, g1, w);
  if (m.ve <= 0.0 || m.vg <= 0.0) return 0.0;
  const double se = std::sqrt(m.ve);
  const double sg = std::sqrt(m.vg);
  const double cor = m.cov / (se * sg);
  return se * sg * cor / m.me;
}

double selection_bias_direct(std::span<const double> e, std::span<const double> g1, std::span<const double> w) {
  const Moments m = law_moments(e, g1, w);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    num += w[i] * e[i] * g1[i];
    den += w[i] * e[i];
  }
  return num / den - m.mg;
}

void RicConfig::validate() const {
  if (p_values.empty()) throw Error(ErrorKind::ConfigError, "at least one P value is required");
  for (int p : p_values) {
    if (p < 0) throw Error(ErrorKind::ConfigError, "P values must be >= 0");
  }
  if (n_draws < 2 || n_atoms < 1 || n_trees < 1) throw Error(ErrorKind::ConfigError, "invalid RIC draw settings");
  if (!(a_split > 0.0 && a_split < 1.0) || !(b_split >= 0.0) || !(k > 0.0)) {
    throw Error(ErrorKind::ConfigError, "invalid RIC tree prior");
  }
}

bool RicDiagnostic::decreasing() const {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].sd < rows[i - 1].sd)) return false;
  }
  return true;
}

RicDiagnostic ric_prior_diagnostic(const RicConfig& config, RngStream& rng) {
  config.validate();
  const double sqrt_t = std::sqrt(static_cast<double>(config.n_trees));
  const double g_leaf_sd = 0.5 / (config.k * sqrt_t);
  const double e_leaf_sd = 3.0 / (config.k * sqrt_t);
  RicDiagnostic out;
  for (std::size_t pi = 0; pi < config.p_values.size(); ++pi) {
    const int p = config.p_values[pi];
    RicRow row;
    row.p = p;
    const RngStream prng = rng.split(pi);
    row.delta = kernels::map_index_omp(static_cast<std::size_t>(config.n_draws), [&](std::size_t d) -> double {
      if (p == 0) return 0.0;
      RngStream r = prng.split(d);
      MatrixXd x(config.n_atoms, p);
      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        for (Eigen::Index c = 0; c < x.cols(); ++c) x(i, c) = r.uniform();
      }
      const CutGrid grid(x);
      std::vector<DecisionTree> gt, et;
      for (int t = 0; t < config.n_trees; ++t) gt.push_back(sample_prior_tree(grid, config.a_split, config.b_split, g_leaf_sd, r));
      for (int t = 0; t < config.n_trees; ++t) et.push_back(sample_prior_tree(grid, config.a_split, config.b_split, e_leaf_sd, r));
      const auto g = kernels::forest_predict_serial(gt, x);
      auto e = kernels::forest_predict_serial(et, x);
      for (auto& v : e) v = normal_cdf(v);
      const std::vector<double> w(static_cast<std::size_t>(config.n_atoms), 1.0);
      return selection_bias(e, g, w);
    });
    row.sd = std::sqrt(variance(row.delta));
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace bnpc
