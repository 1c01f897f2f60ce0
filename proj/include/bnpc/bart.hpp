#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bnpc/numerics.hpp"

namespace bnpc {

struct TreeNode {
  int var = -1;       // split variable; -1 marks a leaf
  double cut = 0.0;   // x[var] < cut routes left
  int left = -1;
  int right = -1;
  int parent = -1;
  int depth = 0;
  double value = 0.0;  // leaf prediction

  bool is_leaf() const { return var < 0; }
};

/// Binary decision tree; node 0 is the root. Internal nodes always have two
/// children, so every input routes to exactly one leaf.
class DecisionTree {
 public:
  explicit DecisionTree(double root_value = 0.0);

  /// Validates the child/parent links and recomputes depths.
  static DecisionTree from_nodes(std::vector<TreeNode> nodes);

  double eval(std::span<const double> x) const { return nodes_[static_cast<std::size_t>(leaf_index(x))].value; }
  int leaf_index(std::span<const double> x) const;

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  TreeNode& node(int i) { return nodes_[static_cast<std::size_t>(i)]; }
  int capacity() const { return static_cast<int>(nodes_.size()); }
  bool is_live(int i) const;

  std::vector<int> leaves() const;
  std::vector<int> internal_nodes() const;
  /// Internal nodes whose children are both leaves.
  std::vector<int> nog_nodes() const;
  int n_leaves() const;
  int max_depth() const;
  bool is_root_only() const { return nodes_[0].is_leaf(); }

  /// Turn leaf `leaf` into a split on (var, cut); returns (left, right).
  std::pair<int, int> split(int leaf, int var, double cut, double left_value = 0.0,
                            double right_value = 0.0);
  /// Remove the two leaf children of `node`, making it a leaf.
  void collapse(int node, double value = 0.0);

  /// Copy holding only reachable nodes, renumbered in preorder.
  DecisionTree compact() const;

  std::string serialize() const;
  static DecisionTree parse(const std::string& text);

 private:
  int allocate();

  std::vector<TreeNode> nodes_;
  std::vector<int> free_;
};

/// Sum of T trees with its prior/noise state.
struct BartForest {
  std::vector<DecisionTree> trees;
  double leaf_sd = 1.0;
  double noise_sd = 1.0;
  double a_split = 0.95;
  double b_split = 2.0;

  double eval(std::span<const double> x) const;
  /// Prior variance of g(x): T * leaf_sd^2.
  double signal_variance() const { return static_cast<double>(trees.size()) * leaf_sd * leaf_sd; }
};

/// Text form: "forest T leaf_sd noise_sd a b" followed by one tree per line.
void write_forest(std::ostream& os, const BartForest& f);
BartForest read_forest(std::istream& is);

double tree_eval(const DecisionTree& t, std::span<const double> x);
double forest_eval(const BartForest& f, std::span<const double> x);

/// Probability that a node at `depth` splits: a * (1 + depth)^(-b).
double split_probability(int depth, double a_split, double b_split);

/// Sum over nodes of log split / stop probabilities.
double tree_log_prior(const DecisionTree& t, double a_split, double b_split);

/// sigma_g^2 * (fraction of trees where x and x' share a leaf), with
/// sigma_g^2 = T * leaf_sd^2.
double induced_kernel(std::span<const DecisionTree> trees, double leaf_sd, std::span<const double> x,
                      std::span<const double> xp);
double induced_kernel(const BartForest& f, std::span<const double> x, std::span<const double> xp);

/// Candidate split values per covariate: the distinct observed values other
/// than the minimum. A constant covariate has none and is never proposed.
class CutGrid {
 public:
  CutGrid() = default;
  explicit CutGrid(const MatrixXd& x);

  int n_vars() const { return static_cast<int>(cuts_.size()); }
  std::span<const double> cuts(int var) const { return cuts_[static_cast<std::size_t>(var)]; }
  std::span<const int> proposable() const { return proposable_; }

 private:
  std::vector<std::vector<double>> cuts_;
  std::vector<int> proposable_;
};

/// Tree grown from the branching-process prior with Normal(0, leaf_sd^2)
/// leaves. Empty leaves are allowed (no data involved).
DecisionTree sample_prior_tree(const CutGrid& grid, double a_split, double b_split, double leaf_sd,
                               RngStream& rng);

struct TreeMoveStats {
  long proposed_grow = 0, accepted_grow = 0;
  long proposed_prune = 0, accepted_prune = 0;
  long proposed_change = 0, accepted_change = 0;
};

/// Backfitting MCMC for a sum of trees over a fixed design. Each sweep visits
/// every tree: Metropolis-Hastings grow (0.25) / prune (0.25) / change (0.5)
/// on the partial residual, then conjugate normal leaf draws. Proposals that
/// would leave a leaf without observations are rejected.
class ForestSampler {
 public:
  ForestSampler(MatrixXd x, int n_trees, double leaf_sd, double a_split, double b_split);

  void sweep(std::span<const double> target, double sigma, RngStream& rng);

  /// Per-observation precisions 1/sigma_i^2 for heteroscedastic noise; pass
  /// sigma = 1 to sweep() when set. Empty restores unit weights.
  void set_weights(std::vector<double> w);

  std::span<const double> fit() const { return fit_; }
  const std::vector<DecisionTree>& trees() const { return trees_; }
  std::vector<DecisionTree> compact_trees() const;
  const MatrixXd& design() const { return x_; }
  int n_obs() const { return static_cast<int>(x_.rows()); }
  double leaf_sd() const { return leaf_sd_; }
  double a_split() const { return a_split_; }
  double b_split() const { return b_split_; }
  const TreeMoveStats& move_stats() const { return stats_; }

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  void update_tree(std::size_t t, std::span<const double> resid, double sigma, RngStream& rng);
  bool grow(std::size_t t, std::span<const double> resid, double sigma, RngStream& rng);
  bool prune(std::size_t t, std::span<const double> resid, double sigma, RngStream& rng);
  bool change(std::size_t t, std::span<const double> resid, double sigma, RngStream& rng);
  void draw_leaves(std::size_t t, std::span<const double> resid, double sigma, RngStream& rng);
  double leaf_loglik(double n, double sum, double sigma) const;
  double weight(std::size_t i) const { return weights_.empty() ? 1.0 : weights_[i]; }
  void rebuild_assignments();

  MatrixXd x_;
  CutGrid grid_;
  double leaf_sd_;
  double a_split_;
  double b_split_;
  std::vector<DecisionTree> trees_;
  std::vector<std::vector<int>> leaf_of_;
  std::vector<double> fit_;
  std::vector<double> resid_;
  std::vector<double> weights_;
  TreeMoveStats stats_;
};

struct BartConfig {
  int n_trees = 200;
  double a_split = 0.95;
  double b_split = 2.0;
  double k = 2.0;
  int burn_in = 500;
  int n_draws = 1000;
  int thin = 1;
  double sigma_nu = 3.0;
  double sigma_quantile = 0.9;
  std::optional<double> fixed_sigma;    // original outcome scale
  std::optional<double> leaf_sd_scale;  // multiplies the default leaf sd
  bool keep_forests = true;

  void validate() const;
};

/// One BART Markov chain (continuous or probit outcome). fit_bart and
/// fit_probit_bart drive it; the CLI drives it directly so it can checkpoint.
class BartChain {
 public:
  enum class Kind { Continuous, Probit };

  BartChain(const MatrixXd& x, const VectorXd& y, const BartConfig& config, Kind kind);

  void step(RngStream& rng);

  Kind kind() const { return kind_; }
  /// Current forest on the original outcome scale (probit scale for Probit).
  BartForest current_forest() const;
  /// Current g at the training rows, original scale.
  std::vector<double> current_fit() const;
  double current_sigma() const { return kind_ == Kind::Probit ? 1.0 : sigma_ * y_scale_; }
  double y_offset() const { return y_offset_; }
  double y_scale() const { return y_scale_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

  void save(std::ostream& os) const;
  void load(std::istream& is);

 private:
  Kind kind_;
  BartConfig config_;
  VectorXd target_;  // standardized outcome, or 0/1 labels for probit
  std::vector<double> latent_;
  double y_offset_ = 0.0;
  double y_scale_ = 1.0;
  double sigma_ = 1.0;
  double lambda_ = 1.0;
  ForestSampler sampler_;
  std::vector<std::string> warnings_;
};

/// Continuous-outcome BART. Outcomes are mapped to [-0.5, 0.5] internally;
/// stored draws are on the original scale.
struct BartFit {
  std::vector<BartForest> draws;
  MatrixXd train_fit;  // N x B
  std::vector<double> sigma;
  double y_offset = 0.0;
  double y_scale = 1.0;
};

BartFit fit_bart(const MatrixXd& x, const VectorXd& y, const BartConfig& config, RngStream& rng);

/// Probit BART via latent truncated-normal augmentation; draws live on the
/// probit scale.
struct ProbitBartFit {
  std::vector<BartForest> draws;
  MatrixXd train_fit;  // latent g at training rows, N x B
  std::vector<std::string> warnings;

  /// Posterior mean of Phi(g(x)).
  double prob(std::span<const double> x) const;
  std::vector<double> train_prob() const;
};

ProbitBartFit fit_probit_bart(const MatrixXd& x, const VectorXd& y01, const BartConfig& config,
                              RngStream& rng);

/// Prior calibration shared by BART fits on the standardized scale.
double bart_leaf_sd(const BartConfig& config, bool probit);
/// Scaled-inverse-chi-squared scale lambda so that sigma_hat^2 sits at the
/// configured prior quantile.
double sigma_prior_scale(double sigma_hat, double nu, double quantile);
double ols_residual_sd(const MatrixXd& x, const VectorXd& y);

}  // namespace bnpc
