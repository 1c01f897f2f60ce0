#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "bnpc/bart.hpp"
#include "bnpc/causal/bcf.hpp"
#include "bnpc/causal/estimands.hpp"
#include "bnpc/covariate_models.hpp"

namespace bnpc::cli {

namespace fs = std::filesystem;

std::string sha256_hex(const fs::path& file);

/// Posterior draw of a linear outcome model
/// E(Y | a, x) = intercept + beta_a a + beta_e (alpha0 + x'alpha) + x'beta.
struct LinearDraw {
  double intercept = 0.0;
  double beta_a = 0.0;
  double beta_e = 0.0;
  double alpha0 = 0.0;
  VectorXd alpha;  // empty: no propensity term
  VectorXd beta;
  double noise_sd = 1.0;
};

class LinearOutcome : public OutcomeModel {
 public:
  LinearOutcome(std::vector<LinearDraw> draws, int p) : draws_(std::move(draws)), p_(p) {}
  std::size_t n_draws() const override { return draws_.size(); }
  int dim() const override { return p_; }
  double mean(std::size_t b, double a, std::span<const double> x) const override;
  double noise_sd(std::size_t b, double) const override { return draws_[b].noise_sd; }
  double effect(std::size_t b, std::span<const double>) const override { return draws_[b].beta_a; }
  const std::vector<LinearDraw>& draws() const { return draws_; }

 private:
  std::vector<LinearDraw> draws_;
  int p_;
};

// Draw files: one header line, then one record per kept draw.
void write_bcf_draw(std::ostream& os, const BcfDraw& d);
BcfDraw read_bcf_draw(std::istream& is);
void write_bart_draw(std::ostream& os, const BartForest& f, double sigma);
std::pair<BartForest, double> read_bart_draw(std::istream& is);
void write_linear_draw(std::ostream& os, const LinearDraw& d);
LinearDraw read_linear_draw(std::istream& is);
void write_mixture(std::ostream& os, const StickBreakingMixture& m);
StickBreakingMixture read_mixture(std::istream& is);

/// Reads "<tag> <count>" and returns count.
std::size_t read_header(std::istream& is, const std::string& tag);

struct ManifestChain {
  std::string file;
  std::uint64_t stream = 0;
  int n_draws = 0;
};

struct Manifest {
  std::string model;
  std::uint64_t seed = 0;
  std::vector<ManifestChain> chains;
  std::map<std::string, std::string> hashes;  // file name -> sha256
};

/// Hashes every listed file (relative to dir) and writes manifest.json.
void write_manifest(const fs::path& dir, Manifest m, const std::vector<std::string>& files);
Manifest read_manifest(const fs::path& dir);

}  // namespace bnpc::cli
