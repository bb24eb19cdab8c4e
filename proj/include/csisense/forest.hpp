#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "csisense/error.hpp"
#include "csisense/features.hpp"
#include "csisense/parallel.hpp"
#include "csisense/rng.hpp"

namespace csisense::forest {

using Counts = std::vector<std::uint32_t>;

/// Gini impurity 1 - sum_i p_i^2, evaluated as (N^2 - sum c_i^2) / N^2 so
/// that simple ratios such as 2/3 come out correctly rounded.
inline double gini(std::span<const std::uint32_t> counts) {
  std::uint64_t total = 0, sq = 0;
  for (auto c : counts) {
    total += c;
    sq += static_cast<std::uint64_t>(c) * c;
  }
  if (total == 0) throw PreconditionError("gini of an empty node");
  const std::uint64_t t2 = total * total;
  return static_cast<double>(t2 - sq) / static_cast<double>(t2);
}

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double gain = 0.0;  // Gini(parent) - weighted child Gini
};

/// Gains at or below this are treated as "no improvement".
inline constexpr double kMinGain = 1e-12;
/// Gains closer than this count as equal, so that rounding in the running
/// sums cannot override the tie order.
inline constexpr double kGainTie = 1e-12;

/// Best threshold split over the candidate features. Thresholds are
/// midpoints of consecutive distinct values; x <= threshold goes left.
/// Ties prefer the lowest feature index, then the lowest threshold.
inline std::optional<Split> best_split(const LabeledSet& data, std::span<const std::size_t> rows,
                                       std::span<const std::size_t> candidate_features, int num_classes) {
  if (rows.empty()) return std::nullopt;
  const auto K = static_cast<std::size_t>(num_classes);
  Counts parent(K, 0);
  for (auto r : rows) ++parent[static_cast<std::size_t>(data.y[r])];
  const double parent_gini = gini(parent);
  if (parent_gini <= 0.0) return std::nullopt;
  const double n = static_cast<double>(rows.size());

  std::optional<Split> best;
  std::vector<std::pair<double, int>> column(rows.size());
  Counts left(K);
  for (std::size_t f : candidate_features) {
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = {data.x[rows[i]][f], data.y[rows[i]]};
    std::sort(column.begin(), column.end());
    std::fill(left.begin(), left.end(), 0u);
    std::uint64_t left_sq = 0;
    std::uint64_t right_sq = 0;
    for (auto c : parent) right_sq += static_cast<std::uint64_t>(c) * c;
    for (std::size_t i = 0; i + 1 < column.size(); ++i) {
      const auto cls = static_cast<std::size_t>(column[i].second);
      // Move one sample left and update the sums of squared counts.
      const std::uint64_t l = left[cls], r = parent[cls] - left[cls];
      left_sq += 2 * l + 1;
      right_sq -= 2 * r - 1;
      ++left[cls];
      if (column[i].first == column[i + 1].first) continue;
      const double nl = static_cast<double>(i + 1), nr = n - nl;
      // N_j/N * Gini(j) = (N_j^2 - sum c^2) / (N_j * N)
      const double weighted = (nl * nl - static_cast<double>(left_sq)) / (nl * n) +
                              (nr * nr - static_cast<double>(right_sq)) / (nr * n);
      const double gain = parent_gini - weighted;
      if (gain <= kMinGain) continue;
      const double thr = column[i].first + (column[i + 1].first - column[i].first) / 2.0;
      const bool better =
          !best || gain > best->gain + kGainTie ||
          (gain >= best->gain - kGainTie && (f < best->feature || (f == best->feature && thr < best->threshold)));
      if (better) best = Split{f, thr, gain};
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Trees
// ---------------------------------------------------------------------------

struct TreeNode {
  // Split nodes have feature >= 0 and valid children; leaves have feature = -1.
  int feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  Counts counts;
  int label = 0;

  bool is_leaf() const noexcept { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

/// Nodes in preorder; nodes[0] is the root.
struct Tree {
  std::vector<TreeNode> nodes;

  int predict(std::span<const double> x) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
    }
    return nodes[i].label;
  }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes[i].is_leaf()) {
        stack.emplace_back(static_cast<std::size_t>(nodes[i].left), d + 1);
        stack.emplace_back(static_cast<std::size_t>(nodes[i].right), d + 1);
      }
    }
    return best;
  }

  friend bool operator==(const Tree&, const Tree&) = default;
};

struct TreeParams {
  std::size_t max_features = 0;  // 0 means all features
  int max_depth = -1;            // < 0 means unlimited
  std::size_t min_samples_split = 2;
};

inline int majority(std::span<const std::uint32_t> counts) {
  int best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c)
    if (counts[c] > counts[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

namespace detail {

inline std::int32_t grow(const LabeledSet& data, std::vector<std::size_t>& rows, int num_classes, const TreeParams& p,
                         Rng& rng, int depth, Tree& tree) {
  const auto K = static_cast<std::size_t>(num_classes);
  const std::size_t d = data.dims();
  TreeNode node;
  node.counts.assign(K, 0);
  for (auto r : rows) ++node.counts[static_cast<std::size_t>(data.y[r])];
  node.label = majority(node.counts);
  const auto self = static_cast<std::int32_t>(tree.nodes.size());
  tree.nodes.push_back(node);

  const bool pure = std::count_if(node.counts.begin(), node.counts.end(), [](auto c) { return c > 0; }) <= 1;
  if (pure || rows.size() < p.min_samples_split || (p.max_depth >= 0 && depth >= p.max_depth)) return self;

  std::vector<std::size_t> features(d);
  std::iota(features.begin(), features.end(), std::size_t{0});
  const std::size_t m = p.max_features == 0 ? d : std::min(p.max_features, d);
  if (m < d) {
    // Partial Fisher-Yates: the first m entries become a uniform sample.
    for (std::size_t i = 0; i < m; ++i) std::swap(features[i], features[i + rng.below(d - i)]);
    features.resize(m);
    std::sort(features.begin(), features.end());
  }

  const auto split = best_split(data, rows, features, num_classes);
  if (!split) return self;

  std::vector<std::size_t> left_rows, right_rows;
  for (auto r : rows) (data.x[r][split->feature] <= split->threshold ? left_rows : right_rows).push_back(r);
  rows.clear();
  rows.shrink_to_fit();

  tree.nodes[static_cast<std::size_t>(self)].feature = static_cast<int>(split->feature);
  tree.nodes[static_cast<std::size_t>(self)].threshold = split->threshold;
  const auto l = grow(data, left_rows, num_classes, p, rng, depth + 1, tree);
  tree.nodes[static_cast<std::size_t>(self)].left = l;
  const auto r = grow(data, right_rows, num_classes, p, rng, depth + 1, tree);
  tree.nodes[static_cast<std::size_t>(self)].right = r;
  return self;
}

}  // namespace detail

/// Grows a CART tree on `rows` of `data` (duplicates allowed, as produced
/// by bootstrapping).
inline Tree fit_tree(const LabeledSet& data, std::vector<std::size_t> rows, int num_classes, const TreeParams& p,
                     Rng& rng) {
  if (rows.empty()) throw PreconditionError("cannot fit a tree on zero samples");
  for (auto r : rows)
    if (data.y[r] < 0 || data.y[r] >= num_classes) throw PreconditionError("label out of range");
  Tree t;
  detail::grow(data, rows, num_classes, p, rng, 0, t);
  return t;
}

inline Tree fit_tree(const LabeledSet& data, int num_classes, const TreeParams& p, Rng& rng) {
  std::vector<std::size_t> rows(data.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return fit_tree(data, std::move(rows), num_classes, p, rng);
}

// ---------------------------------------------------------------------------
// Forest
// ---------------------------------------------------------------------------

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_features = 0;  // 0 means ceil(sqrt(d))
  int max_depth = -1;
  std::size_t min_samples_split = 2;
  bool bootstrap = true;
  unsigned threads = 1;
};

struct ForestModel {
  int num_classes = 0;
  std::size_t max_features = 0;
  std::uint64_t seed = 0;
  std::vector<Tree> trees;
  double oob_accuracy = -1.0;  // < 0 when no sample was ever out of bag

  Counts votes(std::span<const double> x) const {
    Counts v(static_cast<std::size_t>(num_classes), 0);
    for (const auto& t : trees) ++v[static_cast<std::size_t>(t.predict(x))];
    return v;
  }
};

inline ForestModel fit_forest(const LabeledSet& data, int num_classes, const ForestParams& p, std::uint64_t seed) {
  if (p.n_trees < 1) throw PreconditionError("forest needs at least one tree");
  if (data.size() == 0) throw PreconditionError("cannot fit a forest on zero samples");
  const std::size_t d = data.dims();
  ForestModel m;
  m.num_classes = num_classes;
  m.seed = seed;
  m.max_features = p.max_features == 0 ? static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d))))
                                        : std::min(p.max_features, d);
  m.trees.resize(p.n_trees);
  const std::size_t n = data.size();
  std::vector<std::vector<char>> in_bag(p.n_trees);

  TreeParams tp{m.max_features, p.max_depth, p.min_samples_split};
  parallel_for(p.n_trees, p.threads, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<std::size_t> rows(n);
    auto& bag = in_bag[t];
    bag.assign(n, 0);
    if (p.bootstrap) {
      for (auto& r : rows) {
        r = static_cast<std::size_t>(rng.below(n));
        bag[r] = 1;
      }
    } else {
      std::iota(rows.begin(), rows.end(), std::size_t{0});
      std::fill(bag.begin(), bag.end(), 1);
    }
    m.trees[t] = fit_tree(data, std::move(rows), num_classes, tp, rng);
  });

  // Out-of-bag estimate: each sample is judged only by trees that never saw it.
  std::size_t judged = 0, correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    Counts v(static_cast<std::size_t>(num_classes), 0);
    bool any = false;
    for (std::size_t t = 0; t < p.n_trees; ++t) {
      if (in_bag[t][i]) continue;
      ++v[static_cast<std::size_t>(m.trees[t].predict(data.x[i]))];
      any = true;
    }
    if (!any) continue;
    ++judged;
    if (majority(v) == data.y[i]) ++correct;
  }
  if (judged > 0) m.oob_accuracy = static_cast<double>(correct) / static_cast<double>(judged);
  return m;
}

/// Majority vote over trees; ties go to the lowest class index.
inline int predict_forest(const ForestModel& m, std::span<const double> x) { return majority(m.votes(x)); }

}  // namespace csisense::forest
