#pragma once

// Random trees grown on bootstrap samples, and their leaves as specialized
// market participants.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "predmarket/betting.hpp"
#include "predmarket/data.hpp"
#include "predmarket/error.hpp"
#include "predmarket/market.hpp"
#include "predmarket/parallel.hpp"
#include "predmarket/random.hpp"

namespace predmarket {

inline constexpr std::size_t kDefaultTreeCount = 50;

/// Internal nodes send x to `left` when x[feature] < threshold. Leaves keep
/// the (possibly bootstrap-weighted) class counts of the samples reaching them.
struct TreeNode {
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  std::size_t feature = npos;
  double threshold = 0.0;
  std::size_t left = npos;
  std::size_t right = npos;
  std::vector<double> counts;

  bool is_leaf() const noexcept { return feature == npos; }
};

class RandomTree {
 public:
  RandomTree() = default;
  /// Nodes in preorder with the root first; validated for shape.
  RandomTree(std::vector<TreeNode> nodes, std::size_t class_count, std::size_t feature_count)
      : nodes_(std::move(nodes)), class_count_(class_count), feature_count_(feature_count) {
    validate();
  }

  std::span<const TreeNode> nodes() const noexcept { return nodes_; }
  std::size_t class_count() const noexcept { return class_count_; }
  std::size_t feature_count() const noexcept { return feature_count_; }

  std::size_t leaf_count() const {
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
  }

  /// Index of the leaf node reached by x.
  std::size_t route(const Instance& x) const {
    if (x.size() != feature_count_) throw SpecError("instance has the wrong number of features");
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) i = x[nodes_[i].feature] < nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
    return i;
  }

  /// h^k = n_k / n at the leaf reached by x.
  ClassifierOutput predict(const Instance& x) const { return leaf_output(route(x)); }

  ClassifierOutput leaf_output(std::size_t node) const {
    const auto& c = nodes_.at(node).counts;
    const double n = sum_of(c);
    ClassifierOutput h(c.size());
    for (std::size_t k = 0; k < c.size(); ++k) h[k] = c[k] / n;
    return h;
  }

  /// Every leaf with the box formed by the split tests on its path, in
  /// preorder. Intervals on the same feature are intersected.
  std::vector<std::pair<std::size_t, BoxDomain>> leaf_domains() const {
    std::vector<std::pair<std::size_t, BoxDomain>> out;
    using Bounds = std::map<std::size_t, std::pair<double, double>>;
    std::vector<std::pair<std::size_t, Bounds>> stack{{0, {}}};
    while (!stack.empty()) {
      auto [i, bounds] = std::move(stack.back());
      stack.pop_back();
      const auto& n = nodes_[i];
      if (n.is_leaf()) {
        BoxDomain box;
        for (const auto& [f, lh] : bounds) box.intervals.push_back(FeatureInterval{f, lh.first, lh.second});
        out.emplace_back(i, std::move(box));
        continue;
      }
      constexpr double inf = std::numeric_limits<double>::infinity();
      Bounds right = bounds;
      auto& r = right.try_emplace(n.feature, -inf, inf).first->second;
      r.first = std::max(r.first, n.threshold);
      auto& l = bounds.try_emplace(n.feature, -inf, inf).first->second;
      l.second = std::min(l.second, n.threshold);
      stack.emplace_back(n.right, std::move(right));
      stack.emplace_back(n.left, std::move(bounds));
    }
    return out;
  }

 private:
  void validate() const {
    if (nodes_.empty()) throw SpecError("tree has no nodes");
    if (class_count_ < 2) throw SpecError("tree needs at least two classes");
    // Preorder: the left child directly follows its parent.
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& n = nodes_[i];
      if (n.is_leaf()) {
        if (n.counts.size() != class_count_ || !(sum_of(n.counts) > 0.0))
          throw SpecError("tree leaf needs one count per class and a positive total");
        continue;
      }
      if (n.feature >= feature_count_) throw SpecError("tree split feature out of range");
      if (n.left != i + 1 || n.right <= n.left || n.right >= nodes_.size())
        throw SpecError("tree nodes are not in preorder");
    }
  }

  std::vector<TreeNode> nodes_;
  std::size_t class_count_ = 0;
  std::size_t feature_count_ = 0;
};

namespace detail {

struct SplitChoice {
  double threshold = 0.0;
  double impurity = 0.0;
  bool found = false;
};

/// Gini-minimizing midpoint threshold on one feature over the sampled rows.
inline SplitChoice best_gini_split(const Dataset& data, std::span<const std::size_t> rows,
                                   std::size_t feature) {
  const std::size_t K = data.class_count();
  std::vector<std::pair<double, std::size_t>> v;
  v.reserve(rows.size());
  for (std::size_t r : rows) v.emplace_back(data.instance(r)[feature], data.label(r).index());
  std::sort(v.begin(), v.end());
  std::vector<double> left(K, 0.0), right(K, 0.0);
  for (const auto& p : v) right[p.second] += 1.0;
  auto gini_mass = [](const std::vector<double>& c, double n) {
    double s = 0.0;
    for (double x : c) s += x * x;
    return n - s / n;  // n * (1 - sum p^2)
  };
  SplitChoice best;
  const double n = static_cast<double>(v.size());
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    left[v[i].second] += 1.0;
    right[v[i].second] -= 1.0;
    if (v[i].first == v[i + 1].first) continue;
    const double nl = static_cast<double>(i + 1);
    const double imp = gini_mass(left, nl) + gini_mass(right, n - nl);
    if (!best.found || imp < best.impurity) {
      const double a = v[i].first, b = v[i + 1].first;
      double mid = a + 0.5 * (b - a);
      if (!(mid > a)) mid = b;
      best = {mid, imp, true};
    }
  }
  return best;
}

}  // namespace detail

/// Grows a tree on the given rows (repeats allowed). Each node splits on one
/// feature drawn uniformly from those with at least two distinct values, at
/// the Gini-best midpoint. Nodes that are pure, hold fewer than two samples,
/// or have no splittable feature become leaves.
inline RandomTree train_tree(const Dataset& data, std::span<const std::size_t> rows, std::uint64_t seed) {
  if (data.empty() || rows.empty()) throw SpecError("cannot train a tree on empty data");
  const std::size_t K = data.class_count(), F = data.feature_count();
  if (K < 2) throw SpecError("tree training needs at least two classes");
  Rng rng = make_rng(seed);
  std::vector<TreeNode> nodes;

  struct Pending {
    std::vector<std::size_t> rows;
    std::size_t parent;  // npos for the root
    bool is_right;
  };
  std::vector<Pending> stack;
  stack.push_back({std::vector<std::size_t>(rows.begin(), rows.end()), TreeNode::npos, false});
  std::vector<std::size_t> splittable;
  while (!stack.empty()) {
    Pending p = std::move(stack.back());
    stack.pop_back();
    const std::size_t id = nodes.size();
    nodes.emplace_back();
    if (p.parent != TreeNode::npos) (p.is_right ? nodes[p.parent].right : nodes[p.parent].left) = id;

    std::vector<double> counts(K, 0.0);
    for (std::size_t r : p.rows) counts[data.label(r).index()] += 1.0;
    const bool pure = std::count_if(counts.begin(), counts.end(), [](double c) { return c > 0.0; }) <= 1;

    splittable.clear();
    if (!pure && p.rows.size() >= 2) {
      for (std::size_t f = 0; f < F; ++f) {
        const double v0 = data.instance(p.rows[0])[f];
        for (std::size_t r : p.rows)
          if (data.instance(r)[f] != v0) {
            splittable.push_back(f);
            break;
          }
      }
    }
    if (splittable.empty()) {
      nodes[id].counts = std::move(counts);
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, splittable.size() - 1);
    const std::size_t f = splittable[pick(rng)];
    const auto split = detail::best_gini_split(data, p.rows, f);
    nodes[id].feature = f;
    nodes[id].threshold = split.threshold;
    std::vector<std::size_t> lrows, rrows;
    for (std::size_t r : p.rows) (data.instance(r)[f] < split.threshold ? lrows : rrows).push_back(r);
    // The right child is pushed first so the left subtree is emitted next.
    stack.push_back({std::move(rrows), id, true});
    stack.push_back({std::move(lrows), id, false});
  }
  return RandomTree(std::move(nodes), K, F);
}

inline RandomTree train_tree(const Dataset& data, std::uint64_t seed) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return train_tree(data, rows, seed);
}

/// Bootstrap rows drawn with replacement for tree t.
inline std::vector<std::size_t> bootstrap_rows(std::size_t n, std::uint64_t seed, std::size_t t) {
  Rng rng = make_rng(seed, 2 * static_cast<std::uint64_t>(t));
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<std::size_t> rows(n);
  for (auto& r : rows) r = pick(rng);
  return rows;
}

using Forest = std::vector<RandomTree>;

/// Trains n_trees trees, each on its own seeded bootstrap sample of size N.
inline Forest train_forest(const Dataset& data, std::size_t n_trees = kDefaultTreeCount,
                           std::uint64_t seed = 0, std::size_t threads = 0) {
  if (n_trees < 1) throw SpecError("a forest needs at least one tree");
  if (data.empty()) throw SpecError("cannot train a forest on empty data");
  Forest forest(n_trees);
  parallel_for(n_trees, threads, [&](std::size_t t) {
    const auto rows = bootstrap_rows(data.size(), seed, t);
    forest[t] = train_tree(data, rows, derive_seed(seed, 2 * static_cast<std::uint64_t>(t) + 1));
  });
  return forest;
}

/// Mean of the trees' leaf outputs at x.
inline ClassifierOutput forest_predict(const Forest& forest, const Instance& x) {
  if (forest.empty()) throw SpecError("empty forest");
  ClassifierOutput out(forest.front().class_count(), 0.0);
  for (const auto& tree : forest) {
    const auto h = tree.predict(x);
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += h[k];
  }
  for (double& v : out) v /= static_cast<double>(forest.size());
  return out;
}

struct LeafBetParams {
  BetFamily family = BetFamily::constant;
  double eta = 1.0;   // constant
  double eps = 0.01;  // aggressive
};

/// Wraps a leaf output in the requested inner betting family.
inline BettingFunction leaf_betting_function(ClassifierOutput h, const LeafBetParams& params) {
  switch (params.family) {
    case BetFamily::constant: return BettingFunction::constant(std::move(h), params.eta);
    case BetFamily::linear: return BettingFunction::linear(std::move(h));
    case BetFamily::aggressive: return BettingFunction::aggressive(std::move(h), params.eps);
    default: throw SpecError("leaf participants use constant, linear or aggressive betting");
  }
}

/// One specialized participant per leaf, tree by tree in preorder, each with
/// budget beta0.
inline std::vector<Participant> extract_leaf_participants(const Forest& forest,
                                                          const LeafBetParams& params = {},
                                                          double beta0 = 1.0) {
  std::vector<Participant> out;
  for (const auto& tree : forest)
    for (auto& [node, box] : tree.leaf_domains())
      out.push_back(Participant{beta0, BettingFunction::specialized(
                                           std::move(box), leaf_betting_function(tree.leaf_output(node), params))});
  return out;
}

/// Routes x through every tree to find the one leaf participant per tree that
/// can be active.
class ForestLeafIndex : public CandidateIndex {
 public:
  explicit ForestLeafIndex(std::shared_ptr<const Forest> forest) : forest_(std::move(forest)) {
    std::size_t next = 0;
    for (const auto& tree : *forest_) {
      std::vector<std::size_t> ids(tree.nodes().size(), TreeNode::npos);
      for (const auto& [node, box] : tree.leaf_domains()) ids[node] = next++;
      leaf_ids_.push_back(std::move(ids));
    }
    covered_ = next;
  }

  void candidates(const Instance& x, std::vector<std::size_t>& out) const override {
    for (std::size_t t = 0; t < forest_->size(); ++t) out.push_back(leaf_ids_[t][(*forest_)[t].route(x)]);
  }
  std::size_t covered() const override { return covered_; }

 private:
  std::shared_ptr<const Forest> forest_;
  std::vector<std::vector<std::size_t>> leaf_ids_;
  std::size_t covered_ = 0;
};

/// The leaf market over a forest, with the routing index installed.
inline Market make_leaf_market(std::shared_ptr<const Forest> forest, const LeafBetParams& params = {},
                               double beta0 = 1.0) {
  if (!forest || forest->empty()) throw SpecError("empty forest");
  Market market(forest->front().class_count());
  for (auto& p : extract_leaf_participants(*forest, params, beta0)) market.add(std::move(p.bettor), p.budget);
  market.set_index(std::make_shared<ForestLeafIndex>(std::move(forest)));
  return market;
}

}  // namespace predmarket
