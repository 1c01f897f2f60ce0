#include "bnpc/bart.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>

#include "bnpc/kernels.hpp"

namespace bnpc {

namespace {


std::size_t pick(std::size_t n, RngStream& rng) {
  auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
  return std::min(i, n - 1);
}

// Checks links among live nodes (depth >= 0) and recomputes depths.
void validate_links(std::vector<TreeNode>& nodes) {
  if (nodes.empty()) throw Error(ErrorKind::ParseError, "tree has no nodes");
  const int n = static_cast<int>(nodes.size());
  std::vector<char> seen(nodes.size(), 0);
  std::vector<int> stack{0};
  nodes[0].parent = -1;
  nodes[0].depth = 0;
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    if (seen[static_cast<std::size_t>(i)]) throw Error(ErrorKind::ParseError, "tree node reached twice");
    seen[static_cast<std::size_t>(i)] = 1;
    TreeNode& nd = nodes[static_cast<std::size_t>(i)];
    if (nd.var < 0) {
      nd.var = -1;
      nd.left = nd.right = -1;
      continue;
    }
    if (nd.left <= 0 || nd.right <= 0 || nd.left >= n || nd.right >= n || nd.left == nd.right) {
      throw Error(ErrorKind::ParseError, "internal tree node needs two valid children");
    }
    for (int c : {nd.left, nd.right}) {
      TreeNode& ch = nodes[static_cast<std::size_t>(c)];
      ch.parent = i;
      ch.depth = nd.depth + 1;
      stack.push_back(c);
    }
  }
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (!seen[i]) nodes[i].depth = -1;
  }
}

}  // namespace

DecisionTree::DecisionTree(double root_value) {
  TreeNode root;
  root.value = root_value;
  nodes_.push_back(root);
}

DecisionTree DecisionTree::from_nodes(std::vector<TreeNode> nodes) {
  validate_links(nodes);
  for (const auto& nd : nodes) {
    if (nd.depth < 0) throw Error(ErrorKind::ParseError, "unreachable tree node");
  }
  DecisionTree t;
  t.nodes_ = std::move(nodes);
  return t;
}

int DecisionTree::leaf_index(std::span<const double> x) const {
  int i = 0;
  while (true) {
    const TreeNode& nd = nodes_[static_cast<std::size_t>(i)];
    if (nd.is_leaf()) return i;
    if (static_cast<std::size_t>(nd.var) >= x.size()) {
      throw Error(ErrorKind::DimensionMismatch, "point has fewer coordinates than a split variable");
    }
    i = x[static_cast<std::size_t>(nd.var)] < nd.cut ? nd.left : nd.right;
  }
}

bool DecisionTree::is_live(int i) const {
  return i >= 0 && i < capacity() && nodes_[static_cast<std::size_t>(i)].depth >= 0;
}

std::vector<int> DecisionTree::leaves() const {
  std::vector<int> out;
  for (int i = 0; i < capacity(); ++i) {
    if (is_live(i) && node(i).is_leaf()) out.push_back(i);
  }
  return out;
}

std::vector<int> DecisionTree::internal_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < capacity(); ++i) {
    if (is_live(i) && !node(i).is_leaf()) out.push_back(i);
  }
  return out;
}

std::vector<int> DecisionTree::nog_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < capacity(); ++i) {
    if (!is_live(i) || node(i).is_leaf()) continue;
    if (node(node(i).left).is_leaf() && node(node(i).right).is_leaf()) out.push_back(i);
  }
  return out;
}

int DecisionTree::n_leaves() const {
  int n = 0;
  for (int i = 0; i < capacity(); ++i) n += (is_live(i) && node(i).is_leaf()) ? 1 : 0;
  return n;
}

int DecisionTree::max_depth() const {
  int d = 0;
  for (const auto& nd : nodes_) d = std::max(d, nd.depth);
  return d;
}

int DecisionTree::allocate() {
  if (!free_.empty()) {
    const int i = free_.back();
    free_.pop_back();
    node(i) = TreeNode{};
    return i;
  }
  nodes_.emplace_back();
  return capacity() - 1;
}

std::pair<int, int> DecisionTree::split(int leaf, int var, double cut, double left_value, double right_value) {
  if (!is_live(leaf) || !node(leaf).is_leaf()) throw Error(ErrorKind::InvalidParameter, "split target is not a leaf");
  if (var < 0) throw Error(ErrorKind::InvalidParameter, "split variable must be >= 0");
  const int l = allocate();
  const int r = allocate();
  const int depth = node(leaf).depth + 1;
  for (auto [c, v] : {std::pair{l, left_value}, std::pair{r, right_value}}) {
    TreeNode& ch = node(c);
    ch.parent = leaf;
    ch.depth = depth;
    ch.value = v;
  }
  TreeNode& p = node(leaf);
  p.var = var;
  p.cut = cut;
  p.left = l;
  p.right = r;
  return {l, r};
}

void DecisionTree::collapse(int i, double value) {
  if (!is_live(i) || node(i).is_leaf()) throw Error(ErrorKind::InvalidParameter, "collapse target is a leaf");
  TreeNode& p = node(i);
  const int l = p.left;
  const int r = p.right;
  if (!node(l).is_leaf() || !node(r).is_leaf()) {
    throw Error(ErrorKind::InvalidParameter, "collapse needs two leaf children");
  }
  p.var = -1;
  p.left = p.right = -1;
  p.value = value;
  for (int c : {r, l}) {
    node(c).depth = -1;
    free_.push_back(c);
  }
}

DecisionTree DecisionTree::compact() const {
  std::vector<TreeNode> out;
  struct Item {
    int old;
    int parent;
    bool left;
  };
  std::vector<Item> st{{0, -1, false}};
  while (!st.empty()) {
    const Item it = st.back();
    st.pop_back();
    const int ni = static_cast<int>(out.size());
    TreeNode nd = node(it.old);
    nd.parent = it.parent;
    out.push_back(nd);
    if (it.parent >= 0) {
      if (it.left) {
        out[static_cast<std::size_t>(it.parent)].left = ni;
      } else {
        out[static_cast<std::size_t>(it.parent)].right = ni;
      }
    }
    if (!nd.is_leaf()) {
      st.push_back({nd.right, ni, false});
      st.push_back({nd.left, ni, true});
    }
  }
  return from_nodes(std::move(out));
}

std::string DecisionTree::serialize() const {
  std::ostringstream os;
  os << std::setprecision(17);
  os << nodes_.size() << ' ' << free_.size();
  for (int f : free_) os << ' ' << f;
  for (const auto& nd : nodes_) {
    os << ' ' << nd.var << ' ' << nd.cut << ' ' << nd.left << ' ' << nd.right << ' ' << (nd.depth < 0 ? 0 : 1) << ' '
       << nd.value;
  }
  return os.str();
}

DecisionTree DecisionTree::parse(const std::string& text) {
  std::istringstream is(text);
  std::size_t n = 0;
  std::size_t nf = 0;
  if (!(is >> n >> nf) || n == 0 || nf >= n) throw Error(ErrorKind::ParseError, "bad tree header");
  std::vector<int> free_list(nf);
  for (auto& f : free_list) {
    if (!(is >> f) || f <= 0 || static_cast<std::size_t>(f) >= n) throw Error(ErrorKind::ParseError, "bad free slot");
  }
  std::vector<TreeNode> nodes(n);
  std::vector<char> live(n);
  for (std::size_t i = 0; i < n; ++i) {
    int lv = 0;
    TreeNode& nd = nodes[i];
    if (!(is >> nd.var >> nd.cut >> nd.left >> nd.right >> lv >> nd.value)) {
      throw Error(ErrorKind::ParseError, "truncated tree node list");
    }
    live[i] = static_cast<char>(lv != 0);
  }
  validate_links(nodes);
  for (std::size_t i = 0; i < n; ++i) {
    if ((nodes[i].depth >= 0) != (live[i] != 0)) throw Error(ErrorKind::ParseError, "tree liveness mismatch");
  }
  DecisionTree t;
  t.nodes_ = std::move(nodes);
  t.free_ = std::move(free_list);
  return t;
}

double BartForest::eval(std::span<const double> x) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.eval(x);
  return s;
}

void write_forest(std::ostream& os, const BartForest& f) {
  os << std::setprecision(17);
  os << "forest " << f.trees.size() << ' ' << f.leaf_sd << ' ' << f.noise_sd << ' ' << f.a_split << ' ' << f.b_split << '\n';
  for (const auto& t : f.trees) os << t.serialize() << '\n';
}

BartForest read_forest(std::istream& is) {
  BartForest f;
  std::string tag;
  std::size_t nt = 0;
  if (!(is >> tag >> nt >> f.leaf_sd >> f.noise_sd >> f.a_split >> f.b_split) || tag != "forest") {
    throw Error(ErrorKind::ParseError, "bad forest header");
  }
  std::string line;
  std::getline(is, line);
  f.trees.reserve(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    if (!std::getline(is, line)) throw Error(ErrorKind::ParseError, "truncated forest");
    f.trees.push_back(DecisionTree::parse(line));
  }
  return f;
}

double tree_eval(const DecisionTree& t, std::span<const double> x) { return t.eval(x); }

double forest_eval(const BartForest& f, std::span<const double> x) { return f.eval(x); }

double split_probability(int depth, double a_split, double b_split) {
  return a_split * std::pow(1.0 + depth, -b_split);
}

double tree_log_prior(const DecisionTree& t, double a_split, double b_split) {
  if (!(a_split > 0.0 && a_split < 1.0) || !(b_split >= 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "tree prior needs 0 < a_split < 1 and b_split >= 0");
  }
  double lp = 0.0;
  for (int i = 0; i < t.capacity(); ++i) {
    if (!t.is_live(i)) continue;
    const double p = split_probability(t.node(i).depth, a_split, b_split);
    lp += t.node(i).is_leaf() ? std::log1p(-p) : std::log(p);
  }
  return lp;
}

double induced_kernel(std::span<const DecisionTree> trees, double leaf_sd, std::span<const double> x,
                      std::span<const double> xp) {
  if (trees.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& t : trees) shared += t.leaf_index(x) == t.leaf_index(xp) ? 1 : 0;
  const double sigma_g2 = static_cast<double>(trees.size()) * leaf_sd * leaf_sd;
  return sigma_g2 * static_cast<double>(shared) / static_cast<double>(trees.size());
}

double induced_kernel(const BartForest& f, std::span<const double> x, std::span<const double> xp) {
  return induced_kernel(f.trees, f.leaf_sd, x, xp);
}

CutGrid::CutGrid(const MatrixXd& x) {
  cuts_.resize(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    std::vector<double> v(x.col(c).data(), x.col(c).data() + x.rows());
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    if (v.size() > 1) {
      cuts_[static_cast<std::size_t>(c)].assign(v.begin() + 1, v.end());
      proposable_.push_back(static_cast<int>(c));
    }
  }
}

namespace {

void grow_prior(DecisionTree& t, int i, const CutGrid& grid, double a, double b, double leaf_sd, RngStream& rng) {
  const auto vars = grid.proposable();
  const double p = split_probability(t.node(i).depth, a, b);
  if (vars.empty() || !(rng.uniform() < p)) {
    t.node(i).value = leaf_sd * rng.normal();
    return;
  }
  const int var = vars[pick(vars.size(), rng)];
  const auto cuts = grid.cuts(var);
  const double cut = cuts[pick(cuts.size(), rng)];
  const auto [l, r] = t.split(i, var, cut);
  grow_prior(t, l, grid, a, b, leaf_sd, rng);
  grow_prior(t, r, grid, a, b, leaf_sd, rng);
}

}  // namespace

DecisionTree sample_prior_tree(const CutGrid& grid, double a_split, double b_split, double leaf_sd,
                               RngStream& rng) {
  if (!(a_split >= 0.0 && a_split < 1.0) || !(b_split >= 0.0) || !(leaf_sd >= 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "invalid tree prior settings");
  }
  DecisionTree t;
  grow_prior(t, 0, grid, a_split, b_split, leaf_sd, rng);
  return t;
}

ForestSampler::ForestSampler(MatrixXd x, int n_trees, double leaf_sd, double a_split, double b_split)
    : x_(std::move(x)), grid_(x_), leaf_sd_(leaf_sd), a_split_(a_split), b_split_(b_split) {
  if (n_trees < 1) throw Error(ErrorKind::ConfigError, "need at least one tree");
  if (!(leaf_sd > 0.0)) throw Error(ErrorKind::InvalidParameter, "leaf sd must be > 0");
  if (!(a_split > 0.0 && a_split < 1.0) || !(b_split >= 0.0)) {
    throw Error(ErrorKind::InvalidParameter, "tree prior needs 0 < a_split < 1 and b_split >= 0");
  }
  if (x_.rows() == 0) throw Error(ErrorKind::InvalidParameter, "empty design");
  trees_.assign(static_cast<std::size_t>(n_trees), DecisionTree());
  leaf_of_.assign(static_cast<std::size_t>(n_trees), std::vector<int>(static_cast<std::size_t>(x_.rows()), 0));
  fit_.assign(static_cast<std::size_t>(x_.rows()), 0.0);
  resid_.assign(static_cast<std::size_t>(x_.rows()), 0.0);
}

double ForestSampler::leaf_loglik(double n, double sum, double sigma) const {
  const double s2 = sigma * sigma;
  const double t2 = leaf_sd_ * leaf_sd_;
  const double d = s2 + n * t2;
  return 0.5 * std::log(s2 / d) + 0.5 * t2 * sum * sum / (s2 * d);
}

void ForestSampler::set_weights(std::vector<double> w) {
  if (!w.empty() && w.size() != fit_.size()) throw Error(ErrorKind::DimensionMismatch, "weight length differs from design");
  for (double v : w) {
    if (!(v > 0.0) || !std::isfinite(v)) throw Error(ErrorKind::InvalidParameter, "observation weights must be positive");
  }
  weights_ = std::move(w);
}

void ForestSampler::sweep(std::span<const double> target, double sigma, RngStream& rng) {
  const std::size_t n = fit_.size();
  if (target.size() != n) throw Error(ErrorKind::DimensionMismatch, "sweep target length differs from design");
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    const DecisionTree& tree = trees_[t];
    const auto& lo = leaf_of_[t];
    for (std::size_t i = 0; i < n; ++i) {
      fit_[i] -= tree.node(lo[i]).value;
      resid_[i] = target[i] - fit_[i];
    }
    update_tree(t, resid_, sigma, rng);
    for (std::size_t i = 0; i < n; ++i) fit_[i] += trees_[t].node(leaf_of_[t][i]).value;
  }
}

void ForestSampler::update_tree(std::size_t t, std::span<const double> resid, double sigma, RngStream& rng) {
  if (trees_[t].is_root_only()) {
    grow(t, resid, sigma, rng);
  } else {
    const double u = rng.uniform();
    if (u < 0.25) {
      grow(t, resid, sigma, rng);
    } else if (u < 0.5) {
      prune(t, resid, sigma, rng);
    } else {
      change(t, resid, sigma, rng);
    }
  }
  draw_leaves(t, resid, sigma, rng);
}

bool ForestSampler::grow(std::size_t t, std::span<const double> resid, double sigma, RngStream& rng) {
  DecisionTree& tree = trees_[t];
  auto& lo = leaf_of_[t];
  ++stats_.proposed_grow;
  const auto leaves = tree.leaves();
  const int leaf = leaves[pick(leaves.size(), rng)];
  const auto vars = grid_.proposable();
  if (vars.empty()) return false;
  const int var = vars[pick(vars.size(), rng)];
  const auto cuts = grid_.cuts(var);
  const double cut = cuts[pick(cuts.size(), rng)];

  double nl = 0, sl = 0, nr = 0, sr = 0;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (lo[i] != leaf) continue;
    if (x_(static_cast<Eigen::Index>(i), var) < cut) {
      nl += weight(i);
      sl += weight(i) * resid[i];
    } else {
      nr += weight(i);
      sr += weight(i) * resid[i];
    }
  }
  if (nl == 0 || nr == 0) return false;

  const int depth = tree.node(leaf).depth;
  const double pd = split_probability(depth, a_split_, b_split_);
  const double pd1 = split_probability(depth + 1, a_split_, b_split_);
  const int parent = tree.node(leaf).parent;
  bool parent_was_nog = false;
  if (parent >= 0) {
    const TreeNode& p = tree.node(parent);
    parent_was_nog = tree.node(p.left).is_leaf() && tree.node(p.right).is_leaf();
  }
  const double nog_after = static_cast<double>(tree.nog_nodes().size()) + 1.0 - (parent_was_nog ? 1.0 : 0.0);
  const double p_grow_fwd = tree.is_root_only() ? 1.0 : 0.25;
  const double n_leaves = static_cast<double>(leaves.size());

  double log_alpha = leaf_loglik(nl, sl, sigma) + leaf_loglik(nr, sr, sigma) - leaf_loglik(nl + nr, sl + sr, sigma);
  log_alpha += std::log(pd) + 2.0 * std::log1p(-pd1) - std::log1p(-pd);
  log_alpha += std::log(0.25 / nog_after) - std::log(p_grow_fwd / n_leaves);
  if (!(std::log(rng.uniform()) < log_alpha)) return false;

  const auto [l, r] = tree.split(leaf, var, cut);
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (lo[i] == leaf) lo[i] = x_(static_cast<Eigen::Index>(i), var) < cut ? l : r;
  }
  ++stats_.accepted_grow;
  return true;
}

bool ForestSampler::prune(std::size_t t, std::span<const double> resid, double sigma, RngStream& rng) {
  DecisionTree& tree = trees_[t];
  auto& lo = leaf_of_[t];
  ++stats_.proposed_prune;
  const auto nogs = tree.nog_nodes();
  const int p = nogs[pick(nogs.size(), rng)];
  const int l = tree.node(p).left;
  const int r = tree.node(p).right;

  double nl = 0, sl = 0, nr = 0, sr = 0;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (lo[i] == l) {
      nl += weight(i);
      sl += weight(i) * resid[i];
    } else if (lo[i] == r) {
      nr += weight(i);
      sr += weight(i) * resid[i];
    }
  }
  const int depth = tree.node(p).depth;
  const double pd = split_probability(depth, a_split_, b_split_);
  const double pd1 = split_probability(depth + 1, a_split_, b_split_);
  const double leaves_after = static_cast<double>(tree.n_leaves() - 1);
  const double p_grow_rev = p == 0 ? 1.0 : 0.25;
  const double nog_before = static_cast<double>(nogs.size());

  double log_alpha = leaf_loglik(nl + nr, sl + sr, sigma) - leaf_loglik(nl, sl, sigma) - leaf_loglik(nr, sr, sigma);
  log_alpha += std::log1p(-pd) - std::log(pd) - 2.0 * std::log1p(-pd1);
  log_alpha += std::log(p_grow_rev / leaves_after) - std::log(0.25 / nog_before);
  if (!(std::log(rng.uniform()) < log_alpha)) return false;

  tree.collapse(p);
  for (auto& v : lo) {
    if (v == l || v == r) v = p;
  }
  ++stats_.accepted_prune;
  return true;
}

bool ForestSampler::change(std::size_t t, std::span<const double> resid, double sigma, RngStream& rng) {
  DecisionTree& tree = trees_[t];
  auto& lo = leaf_of_[t];
  ++stats_.proposed_change;
  const auto internal = tree.internal_nodes();
  const int q = internal[pick(internal.size(), rng)];
  const auto vars = grid_.proposable();
  if (vars.empty()) return false;
  const int var = vars[pick(vars.size(), rng)];
  const auto cuts = grid_.cuts(var);
  const double cut = cuts[pick(cuts.size(), rng)];

  const std::size_t cap = static_cast<std::size_t>(tree.capacity());
  std::vector<char> in_sub(cap, 0);
  std::vector<int> stack{q};
  while (!stack.empty()) {
    const int i = stack.back();
    stack.pop_back();
    in_sub[static_cast<std::size_t>(i)] = 1;
    if (!tree.node(i).is_leaf()) {
      stack.push_back(tree.node(i).left);
      stack.push_back(tree.node(i).right);
    }
  }

  const int old_var = tree.node(q).var;
  const double old_cut = tree.node(q).cut;
  std::vector<double> n_old(cap, 0.0), s_old(cap, 0.0), n_new(cap, 0.0), s_new(cap, 0.0);
  std::vector<std::pair<std::size_t, int>> moved;
  tree.node(q).var = var;
  tree.node(q).cut = cut;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    const auto li = static_cast<std::size_t>(lo[i]);
    if (!in_sub[li]) continue;
    n_old[li] += weight(i);
    s_old[li] += weight(i) * resid[i];
    int k = q;
    while (!tree.node(k).is_leaf()) {
      const TreeNode& nd = tree.node(k);
      k = x_(static_cast<Eigen::Index>(i), nd.var) < nd.cut ? nd.left : nd.right;
    }
    n_new[static_cast<std::size_t>(k)] += weight(i);
    s_new[static_cast<std::size_t>(k)] += weight(i) * resid[i];
    moved.emplace_back(i, k);
  }

  double log_alpha = 0.0;
  bool empty = false;
  for (std::size_t k = 0; k < cap; ++k) {
    if (!in_sub[k] || !tree.node(static_cast<int>(k)).is_leaf()) continue;
    if (n_new[k] == 0) {
      empty = true;
      break;
    }
    log_alpha += leaf_loglik(n_new[k], s_new[k], sigma) - leaf_loglik(n_old[k], s_old[k], sigma);
  }
  const double u = rng.uniform();
  if (empty || !(std::log(u) < log_alpha)) {
    tree.node(q).var = old_var;
    tree.node(q).cut = old_cut;
    return false;
  }
  for (const auto& [i, k] : moved) lo[i] = k;
  ++stats_.accepted_change;
  return true;
}

void ForestSampler::draw_leaves(std::size_t t, std::span<const double> resid, double sigma, RngStream& rng) {
  DecisionTree& tree = trees_[t];
  const auto& lo = leaf_of_[t];
  const std::size_t cap = static_cast<std::size_t>(tree.capacity());
  std::vector<double> n(cap, 0.0), s(cap, 0.0);
  for (std::size_t i = 0; i < lo.size(); ++i) {
    n[static_cast<std::size_t>(lo[i])] += weight(i);
    s[static_cast<std::size_t>(lo[i])] += weight(i) * resid[i];
  }
  const double s2 = sigma * sigma;
  const double t2 = leaf_sd_ * leaf_sd_;
  for (int k : tree.leaves()) {
    const auto ks = static_cast<std::size_t>(k);
    const double prec = n[ks] / s2 + 1.0 / t2;
    const double m = (s[ks] / s2) / prec;
    tree.node(k).value = m + rng.normal() / std::sqrt(prec);
  }
}

void ForestSampler::rebuild_assignments() {
  std::vector<double> row(static_cast<std::size_t>(x_.cols()));
  for (Eigen::Index i = 0; i < x_.rows(); ++i) {
    for (Eigen::Index c = 0; c < x_.cols(); ++c) row[static_cast<std::size_t>(c)] = x_(i, c);
    for (std::size_t t = 0; t < trees_.size(); ++t) leaf_of_[t][static_cast<std::size_t>(i)] = trees_[t].leaf_index(row);
  }
}

std::vector<DecisionTree> ForestSampler::compact_trees() const {
  std::vector<DecisionTree> out;
  out.reserve(trees_.size());
  for (const auto& t : trees_) out.push_back(t.compact());
  return out;
}

void ForestSampler::save(std::ostream& os) const {
  os << std::setprecision(17);
  os << "forest " << trees_.size() << ' ' << fit_.size() << '\n';
  for (const auto& t : trees_) os << t.serialize() << '\n';
  os << "fit";
  for (double v : fit_) os << ' ' << v;
  os << '\n';
}

void ForestSampler::load(std::istream& is) {
  std::string tag;
  std::size_t nt = 0;
  std::size_t n = 0;
  if (!(is >> tag >> nt >> n) || tag != "forest" || nt != trees_.size() || n != fit_.size()) {
    throw Error(ErrorKind::ParseError, "forest checkpoint does not match the sampler");
  }
  std::string line;
  std::getline(is, line);
  for (auto& t : trees_) {
    if (!std::getline(is, line)) throw Error(ErrorKind::ParseError, "truncated forest checkpoint");
    t = DecisionTree::parse(line);
  }
  if (!(is >> tag) || tag != "fit") throw Error(ErrorKind::ParseError, "forest checkpoint missing fit");
  for (auto& v : fit_) {
    if (!(is >> v)) throw Error(ErrorKind::ParseError, "truncated fit vector");
  }
  rebuild_assignments();
}

void BartConfig::validate() const {
  if (n_trees < 1 || burn_in < 0 || n_draws < 1 || thin < 1) {
    throw Error(ErrorKind::ConfigError, "BART needs n_trees >= 1, burn_in >= 0, n_draws >= 1, thin >= 1");
  }
  if (!(a_split > 0.0 && a_split < 1.0) || !(b_split >= 0.0) || !(k > 0.0)) {
    throw Error(ErrorKind::ConfigError, "BART prior needs 0 < a_split < 1, b_split >= 0, k > 0");
  }
  if (!(sigma_nu > 0.0) || !(sigma_quantile > 0.0 && sigma_quantile < 1.0)) {
    throw Error(ErrorKind::ConfigError, "invalid noise prior settings");
  }
  if (fixed_sigma && !(*fixed_sigma > 0.0)) throw Error(ErrorKind::ConfigError, "fixed sigma must be > 0");
  if (leaf_sd_scale && !(*leaf_sd_scale > 0.0)) throw Error(ErrorKind::ConfigError, "leaf sd scale must be > 0");
}

double bart_leaf_sd(const BartConfig& config, bool probit) {
  const double base = probit ? 3.0 : 0.5;
  return base / (config.k * std::sqrt(static_cast<double>(config.n_trees))) * config.leaf_sd_scale.value_or(1.0);
}

double sigma_prior_scale(double sigma_hat, double nu, double quantile) {
  const boost::math::chi_squared chi(nu);
  return sigma_hat * sigma_hat * boost::math::quantile(chi, 1.0 - quantile) / nu;
}

double ols_residual_sd(const MatrixXd& x, const VectorXd& y) {
  const Eigen::Index n = y.size();
  const Eigen::Index p = x.cols() + 1;
  if (n < 2) return 0.0;
  if (n <= p) return std::sqrt((y.array() - y.mean()).square().sum() / static_cast<double>(n - 1));
  MatrixXd d(n, p);
  d.col(0).setOnes();
  d.rightCols(x.cols()) = x;
  const VectorXd beta = d.colPivHouseholderQr().solve(y);
  const double sse = (y - d * beta).squaredNorm();
  return std::sqrt(sse / static_cast<double>(n - p));
}

BartChain::BartChain(const MatrixXd& x, const VectorXd& y, const BartConfig& config, Kind kind)
    : kind_(kind),
      config_(config),
      sampler_((config.validate(), x), config.n_trees, bart_leaf_sd(config, kind == Kind::Probit), config.a_split,
               config.b_split) {
  if (x.rows() != y.size()) throw Error(ErrorKind::DimensionMismatch, "X and Y lengths differ");
  if (y.size() < 10) throw Error(ErrorKind::InvalidParameter, "BART needs at least 10 observations");
  if (!y.allFinite()) throw Error(ErrorKind::InvalidParameter, "outcome has non-finite values");
  if (kind_ == Kind::Probit) {
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (y(i) != 0.0 && y(i) != 1.0) throw Error(ErrorKind::InvalidParameter, "probit outcome must be 0/1");
    }
    target_ = y;
    latent_.assign(static_cast<std::size_t>(y.size()), 0.0);
    y_offset_ = normal_quantile(std::clamp(y.mean(), 0.025, 0.975));
    if (y.minCoeff() == y.maxCoeff()) {
      warnings_.push_back(std::string(error_kind_name(ErrorKind::DegenerateData)) + ": binary outcome is constant");
    }
    return;
  }
  const double lo = y.minCoeff();
  const double hi = y.maxCoeff();
  y_scale_ = hi > lo ? hi - lo : 1.0;
  y_offset_ = lo + 0.5 * (hi - lo);
  target_ = (y.array() - y_offset_) / y_scale_;
  if (config_.fixed_sigma) {
    sigma_ = *config_.fixed_sigma / y_scale_;
  } else {
    const double sigma_hat = std::max(ols_residual_sd(x, target_), 1e-3);
    lambda_ = sigma_prior_scale(sigma_hat, config_.sigma_nu, config_.sigma_quantile);
    sigma_ = sigma_hat;
  }
}

void BartChain::step(RngStream& rng) {
  const std::size_t n = static_cast<std::size_t>(target_.size());
  if (kind_ == Kind::Probit) {
    const auto fit = sampler_.fit();
    for (std::size_t i = 0; i < n; ++i) {
      const auto side = target_(static_cast<Eigen::Index>(i)) > 0.5 ? TruncationSide::Right : TruncationSide::Left;
      latent_[i] = sample_truncated_normal(y_offset_ + fit[i], 1.0, side, 0.0, rng) - y_offset_;
    }
    sampler_.sweep(latent_, 1.0, rng);
    return;
  }
  sampler_.sweep(std::span<const double>(target_.data(), n), sigma_, rng);
  if (config_.fixed_sigma) return;
  const auto fit = sampler_.fit();
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = target_(static_cast<Eigen::Index>(i)) - fit[i];
    sse += r * r;
  }
  const double nu = config_.sigma_nu;
  const double s2 = (nu * lambda_ + sse) / sample_chi_squared(nu + static_cast<double>(n), rng);
  sigma_ = std::sqrt(std::max(s2, 1e-300));
}

BartForest BartChain::current_forest() const {
  BartForest f;
  f.trees = sampler_.compact_trees();
  const double shift = y_offset_ / static_cast<double>(f.trees.size());
  for (auto& t : f.trees) {
    for (int k = 0; k < t.capacity(); ++k) {
      if (t.node(k).is_leaf()) t.node(k).value = y_scale_ * t.node(k).value + shift;
    }
  }
  f.leaf_sd = y_scale_ * sampler_.leaf_sd();
  f.noise_sd = current_sigma();
  f.a_split = config_.a_split;
  f.b_split = config_.b_split;
  return f;
}

std::vector<double> BartChain::current_fit() const {
  const auto fit = sampler_.fit();
  std::vector<double> out(fit.size());
  for (std::size_t i = 0; i < fit.size(); ++i) out[i] = y_offset_ + y_scale_ * fit[i];
  return out;
}

void BartChain::save(std::ostream& os) const {
  os << std::setprecision(17);
  os << "chain " << sigma_ << ' ' << latent_.size();
  for (double v : latent_) os << ' ' << v;
  os << '\n';
  sampler_.save(os);
}

void BartChain::load(std::istream& is) {
  std::string tag;
  std::size_t n = 0;
  if (!(is >> tag >> sigma_ >> n) || tag != "chain" || n != latent_.size()) {
    throw Error(ErrorKind::ParseError, "BART chain checkpoint does not match");
  }
  for (auto& v : latent_) {
    if (!(is >> v)) throw Error(ErrorKind::ParseError, "truncated latent vector");
  }
  sampler_.load(is);
}

namespace {

template <class Fit>
void run_chain(BartChain& chain, const BartConfig& config, Fit& out, std::vector<double>* sigma, RngStream& rng) {
  const int total = config.burn_in + config.n_draws * config.thin;
  std::vector<std::vector<double>> fits;
  for (int it = 0; it < total; ++it) {
    chain.step(rng);
    if (it < config.burn_in || (it - config.burn_in) % config.thin != 0) continue;
    fits.push_back(chain.current_fit());
    if (sigma) sigma->push_back(chain.current_sigma());
    if (config.keep_forests) out.draws.push_back(chain.current_forest());
  }
  const auto n = static_cast<Eigen::Index>(fits.empty() ? 0 : fits[0].size());
  out.train_fit.resize(n, static_cast<Eigen::Index>(fits.size()));
  for (std::size_t b = 0; b < fits.size(); ++b) {
    for (Eigen::Index i = 0; i < n; ++i) out.train_fit(i, static_cast<Eigen::Index>(b)) = fits[b][static_cast<std::size_t>(i)];
  }
}

}  // namespace

BartFit fit_bart(const MatrixXd& x, const VectorXd& y, const BartConfig& config, RngStream& rng) {
  BartChain chain(x, y, config, BartChain::Kind::Continuous);
  BartFit out;
  out.y_offset = chain.y_offset();
  out.y_scale = chain.y_scale();
  run_chain(chain, config, out, &out.sigma, rng);
  return out;
}

ProbitBartFit fit_probit_bart(const MatrixXd& x, const VectorXd& y01, const BartConfig& config, RngStream& rng) {
  BartChain chain(x, y01, config, BartChain::Kind::Probit);
  ProbitBartFit out;
  out.warnings = chain.warnings();
  run_chain(chain, config, out, nullptr, rng);
  return out;
}

double ProbitBartFit::prob(std::span<const double> x) const {
  if (draws.empty()) throw Error(ErrorKind::InvalidParameter, "probit fit kept no forests");
  double s = 0.0;
  for (const auto& f : draws) s += normal_cdf(f.eval(x));
  return s / static_cast<double>(draws.size());
}

std::vector<double> ProbitBartFit::train_prob() const {
  std::vector<double> out(static_cast<std::size_t>(train_fit.rows()), 0.0);
  const auto b = static_cast<double>(train_fit.cols());
  for (Eigen::Index i = 0; i < train_fit.rows(); ++i) {
    double s = 0.0;
    for (Eigen::Index j = 0; j < train_fit.cols(); ++j) s += normal_cdf(train_fit(i, j));
    out[static_cast<std::size_t>(i)] = s / b;
  }
  return out;
}

}  // namespace bnpc
