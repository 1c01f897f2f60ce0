#include "bnpc/causal/dataset.hpp"

#include <cmath>

namespace bnpc {

bool Dataset::has_missing() const { return x.array().isNaN().any(); }

int Dataset::n_treated() const {
  int k = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) k += a(i) == 1.0 ? 1 : 0;
  return k;
}

void Dataset::validate() const {
  const Eigen::Index nn = y.size();
  if (a.size() != nn || x.rows() != nn) {
    throw Error(ErrorKind::DimensionMismatch, "Y, A and X must have the same number of rows");
  }
  if (m && m->size() != nn) throw Error(ErrorKind::DimensionMismatch, "mediator length differs from Y");
  if (!covariate_names.empty() && static_cast<Eigen::Index>(covariate_names.size()) != x.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "covariate name count differs from X columns");
  }
  for (Eigen::Index i = 0; i < nn; ++i) {
    if (a(i) != 0.0 && a(i) != 1.0) {
      throw Error(ErrorKind::NonBinaryTreatment, "row " + std::to_string(i + 1) + ": treatment must be 0 or 1");
    }
    if (!std::isfinite(y(i))) throw Error(ErrorKind::ParseError, "row " + std::to_string(i + 1) + ": outcome is missing");
    if (m && !std::isfinite((*m)(i))) {
      throw Error(ErrorKind::ParseError, "row " + std::to_string(i + 1) + ": mediator is missing");
    }
  }
  if (running && (*running < 0 || *running >= x.cols())) {
    throw Error(ErrorKind::ConfigError, "running-variable column out of range");
  }
}

void Dataset::validate_sharp_rdd(double cutoff) const {
  if (!running) throw Error(ErrorKind::ConfigError, "no running variable declared");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double r = x(i, *running);
    if (std::isnan(r)) throw Error(ErrorKind::SharpRddViolation, "row " + std::to_string(i + 1) + ": running variable missing");
    const double expected = r >= cutoff ? 1.0 : 0.0;
    if (a(i) != expected) {
      throw Error(ErrorKind::SharpRddViolation,
                  "row " + std::to_string(i + 1) + ": treatment does not equal 1[running >= cutoff]");
    }
  }
}

Dataset Dataset::rows(const std::vector<int>& idx) const {
  Dataset out;
  const auto k = static_cast<Eigen::Index>(idx.size());
  out.y.resize(k);
  out.a.resize(k);
  out.x.resize(k, x.cols());
  if (m) out.m = VectorXd(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const int i = idx[static_cast<std::size_t>(r)];
    out.y(r) = y(i);
    out.a(r) = a(i);
    out.x.row(r) = x.row(i);
    if (m) (*out.m)(r) = (*m)(i);
  }
  out.running = running;
  out.covariate_names = covariate_names;
  return out;
}

}  // namespace bnpc
