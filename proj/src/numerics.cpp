#include "bnpc/numerics.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/erf.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

namespace bnpc {

std::string_view error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::DegenerateData: return "DegenerateData";
    case ErrorKind::ConfigError: return "ConfigError";
    case ErrorKind::MissingDataUnsupported: return "MissingDataUnsupported";
    case ErrorKind::AllMissingColumn: return "AllMissingColumn";
    case ErrorKind::ZeroEvidence: return "ZeroEvidence";
    case ErrorKind::CallbackFailure: return "CallbackFailure";
    case ErrorKind::EmptySelection: return "EmptySelection";
    case ErrorKind::SharpRddViolation: return "SharpRddViolation";
    case ErrorKind::InsufficientBoundaryData: return "InsufficientBoundaryData";
    case ErrorKind::ZeroTreatmentMass: return "ZeroTreatmentMass";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::NonBinaryTreatment: return "NonBinaryTreatment";
    case ErrorKind::EmptyFile: return "EmptyFile";
    case ErrorKind::IncompatibleEstimand: return "IncompatibleEstimand";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_numerical(ErrorKind kind) {
  return kind == ErrorKind::NotPositiveDefinite || kind == ErrorKind::ZeroEvidence;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream_id) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream_id),
                    static_cast<std::uint32_t>(stream_id >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id)
    : seed_(seed), stream_id_(stream_id), engine_(make_engine(seed, stream_id)) {}

RngStream RngStream::split(std::uint64_t child) const {
  return RngStream(seed_, splitmix64(stream_id_ ^ splitmix64(child + 0x5851f42d4c957f2dULL)));
}

double RngStream::uniform() {
  // 53 random bits, shifted off zero.
  return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
}

double RngStream::normal() {
  // Fresh distribution per call: no cached state outside the engine.
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

std::string RngStream::state() const {
  std::ostringstream os;
  os << seed_ << ' ' << stream_id_ << ' ' << engine_;
  return os.str();
}

void RngStream::set_state(const std::string& state) {
  std::istringstream is(state);
  is >> seed_ >> stream_id_ >> engine_;
  if (!is) throw Error(ErrorKind::ParseError, "malformed rng state");
}

SymMatrix::SymMatrix(MatrixXd m) : m_(std::move(m)) {
  if (m_.rows() != m_.cols()) throw Error(ErrorKind::DimensionMismatch, "matrix is not square");
  const double scale = std::max(1.0, m_.cwiseAbs().maxCoeff());
  if ((m_ - m_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) {
    throw Error(ErrorKind::InvalidParameter, "matrix is not symmetric");
  }
}

double CholeskyFactor::log_det() const {
  const MatrixXd& l = llt.matrixLLT();
  double s = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) s += std::log(l(i, i));
  return 2.0 * s;
}

namespace {

bool factor_ok(const Eigen::LLT<MatrixXd>& llt) {
  if (llt.info() != Eigen::Success) return false;
  const MatrixXd& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    if (!(l(i, i) > 0.0) || !std::isfinite(l(i, i))) return false;
  }
  return true;
}

}  // namespace

CholeskyFactor cholesky(const MatrixXd& a) {
  CholeskyFactor f;
  const Eigen::Index n = a.rows();
  if (n == 0) return f;
  f.llt.compute(a);
  if (factor_ok(f.llt)) return f;
  const double jitter = 1e-8 * a.trace() / static_cast<double>(n);
  if (jitter > 0.0) {
    MatrixXd aj = a;
    aj.diagonal().array() += jitter;
    f.llt.compute(aj);
    f.jitter = jitter;
    if (factor_ok(f.llt)) return f;
  }
  throw Error(ErrorKind::NotPositiveDefinite, "Cholesky factorization failed after jitter");
}

VectorXd cholesky_solve(const SymMatrix& a, const VectorXd& b) {
  if (a.size() != b.size()) throw Error(ErrorKind::DimensionMismatch, "cholesky_solve: size mismatch");
  return cholesky(a.matrix()).solve(b);
}

double sample_gamma(double shape, double rate, RngStream& rng) {
  if (!(shape > 0.0) || !(rate > 0.0)) throw Error(ErrorKind::InvalidParameter, "gamma shape/rate must be > 0");
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(rng);
}

double sample_inverse_gamma(double shape, double scale, RngStream& rng) {
  return 1.0 / sample_gamma(shape, scale, rng);
}

namespace {

// log of a Gamma(shape, 1) draw; stable for tiny shapes where the draw
// itself underflows.
double sample_log_gamma(double shape, RngStream& rng) {
  if (shape >= 1.0) return std::log(sample_gamma(shape, 1.0, rng));
  const double g = sample_gamma(shape + 1.0, 1.0, rng);
  return std::log(g) + std::log(rng.uniform()) / shape;
}

}  // namespace

double sample_beta(double a, double b, RngStream& rng) {
  if (!(a > 0.0) || !(b > 0.0)) throw Error(ErrorKind::InvalidParameter, "beta parameters must be > 0");
  const double la = sample_log_gamma(a, rng);
  const double lb = sample_log_gamma(b, rng);
  const double m = std::max(la, lb);
  const double ea = std::exp(la - m);
  const double eb = std::exp(lb - m);
  return ea / (ea + eb);
}

double sample_half_cauchy(double scale, RngStream& rng) {
  if (!(scale > 0.0)) throw Error(ErrorKind::InvalidParameter, "half-Cauchy scale must be > 0");
  return scale * std::tan(0.5 * M_PI * rng.uniform());
}

double sample_chi_squared(double dof, RngStream& rng) { return sample_gamma(0.5 * dof, 0.5, rng); }

namespace {

// Standard normal restricted to (lo, inf).
double std_normal_above(double lo, RngStream& rng) {
  if (lo <= 0.0) {
    for (;;) {
      const double z = rng.normal();
      if (z > lo) return z;
    }
  }
  // Exponential rejection (Robert 1995) with the optimal rate.
  const double lambda = 0.5 * (lo + std::sqrt(lo * lo + 4.0));
  for (;;) {
    const double z = lo - std::log(rng.uniform()) / lambda;
    const double d = z - lambda;
    if (std::log(rng.uniform()) <= -0.5 * d * d && z > lo) return z;
  }
}

}  // namespace

double sample_truncated_normal(double mean, double sd, TruncationSide side, double bound,
                               RngStream& rng) {
  if (!(sd > 0.0)) throw Error(ErrorKind::InvalidParameter, "truncated normal sd must be > 0");
  for (;;) {
    double x;
    if (side == TruncationSide::Right) {
      x = mean + sd * std_normal_above((bound - mean) / sd, rng);
      if (x > bound) return x;
    } else {
      x = mean - sd * std_normal_above((mean - bound) / sd, rng);
      if (x < bound) return x;
    }
  }
}

std::vector<double> sample_dirichlet(std::span<const double> alpha, RngStream& rng) {
  if (alpha.empty()) throw Error(ErrorKind::InvalidParameter, "Dirichlet needs at least one component");
  std::vector<double> logs(alpha.size());
  for (std::size_t k = 0; k < alpha.size(); ++k) {
    if (!(alpha[k] > 0.0)) throw Error(ErrorKind::InvalidParameter, "Dirichlet parameters must be > 0");
    logs[k] = sample_log_gamma(alpha[k], rng);
  }
  const double lse = log_sum_exp(logs);
  std::vector<double> w(alpha.size());
  double total = 0.0;
  for (std::size_t k = 0; k < w.size(); ++k) {
    w[k] = std::exp(logs[k] - lse);
    total += w[k];
  }
  for (double& x : w) x /= total;
  return w;
}

std::size_t sample_categorical(std::span<const double> weights, RngStream& rng) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw Error(ErrorKind::InvalidParameter, "categorical weights sum to zero");
  double u = rng.uniform() * total;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    u -= weights[k];
    if (u <= 0.0 && weights[k] > 0.0) return k;
  }
  for (std::size_t k = weights.size(); k-- > 0;) {
    if (weights[k] > 0.0) return k;
  }
  return weights.size() - 1;
}

std::size_t sample_categorical_log(std::span<const double> log_weights, RngStream& rng) {
  const double m = *std::max_element(log_weights.begin(), log_weights.end());
  if (!std::isfinite(m)) throw Error(ErrorKind::InvalidParameter, "categorical log weights all -inf");
  std::vector<double> w(log_weights.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::exp(log_weights[k] - m);
  return sample_categorical(w, rng);
}

VectorXd sample_mvn(const VectorXd& mean, const SymMatrix& cov, RngStream& rng) {
  const Eigen::Index n = mean.size();
  if (cov.size() != n) throw Error(ErrorKind::DimensionMismatch, "sample_mvn: size mismatch");
  VectorXd z(n);
  for (Eigen::Index i = 0; i < n; ++i) z(i) = rng.normal();
  if (n == 0) return mean;
  const MatrixXd& c = cov.matrix();
  Eigen::LLT<MatrixXd> llt(c);
  if (factor_ok(llt)) return mean + llt.matrixL() * z;
  // Semi-definite: use the symmetric square root, clipping round-off negatives.
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(c);
  const VectorXd& ev = es.eigenvalues();
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  if (ev.minCoeff() < -1e-8 * scale) {
    throw Error(ErrorKind::NotPositiveDefinite, "covariance has a negative eigenvalue");
  }
  const VectorXd root = ev.cwiseMax(0.0).cwiseSqrt();
  return mean + es.eigenvectors() * root.asDiagonal() * z;
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw Error(ErrorKind::InvalidParameter, "normal_quantile: p outside [0,1]");
  }
  return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * p);
}

double log_normal_pdf(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * M_PI * var) + d * d / var);
}

double log_sum_exp(std::span<const double> v) {
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) m = std::max(m, x);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

double quantile_sorted(std::span<const double> sorted, double prob) {
  if (sorted.empty()) throw Error(ErrorKind::InvalidParameter, "quantile of empty sample");
  const double h = prob * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double quantile(std::vector<double> v, double prob) {
  std::sort(v.begin(), v.end());
  return quantile_sorted(v, prob);
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double variance(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

}  // namespace bnpc
