#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "oracles.hpp"
#include "support.hpp"

using namespace csisense;
using namespace csisense::forest;
using namespace testing_support;
using namespace oracles;

namespace {

LabeledSet small_integer_set(Rng& rng, std::size_t n, std::size_t dims, int k) {
  LabeledSet s;
  for (std::size_t i = 0; i < n; ++i) {
    Vector x(dims);
    for (auto& v : x) v = static_cast<double>(rng.below(5));
    s.x.push_back(std::move(x));
    s.y.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(k))));
  }
  return s;
}

}  // namespace

TEST(Gini, HandValues) {
  EXPECT_EQ(gini(Counts{10, 0, 0}), 0.0);
  EXPECT_EQ(gini(Counts{5, 5, 5}), 2.0 / 3.0);
  EXPECT_EQ(gini(Counts{3, 1, 0}), 0.375);
  EXPECT_THROW(gini(Counts{0, 0, 0}), PreconditionError);
}

TEST(Gini, RangeProperty) {
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    Counts c{static_cast<std::uint32_t>(rng.below(20)), static_cast<std::uint32_t>(rng.below(20)),
             static_cast<std::uint32_t>(rng.below(20))};
    if (c[0] + c[1] + c[2] == 0) continue;
    const double g = gini(c);
    const int nonzero = (c[0] > 0) + (c[1] > 0) + (c[2] > 0);
    EXPECT_GE(g, 0.0);
    EXPECT_LE(g, 2.0 / 3.0 + 1e-15);
    EXPECT_EQ(g == 0.0, nonzero == 1);
  }
}

TEST(BestSplit, FourPointExample) {
  LabeledSet s;
  s.x = {{0.0}, {1.0}, {10.0}, {11.0}};
  s.y = {0, 0, 1, 1};
  const std::vector<std::size_t> rows{0, 1, 2, 3}, feats{0};
  const auto sp = best_split(s, rows, feats, 2);
  ASSERT_TRUE(sp);
  EXPECT_EQ(sp->feature, 0u);
  EXPECT_EQ(sp->threshold, 5.5);
  EXPECT_DOUBLE_EQ(sp->gain, 0.5);
}

TEST(BestSplit, PureNodeAndDuplicateColumns) {
  LabeledSet s;
  s.x = {{1.0, 1.0}, {2.0, 2.0}, {3.0, 3.0}};
  s.y = {1, 1, 1};
  const std::vector<std::size_t> rows{0, 1, 2}, feats{0, 1};
  EXPECT_FALSE(best_split(s, rows, feats, 2));
  s.y = {0, 1, 1};
  const auto sp = best_split(s, rows, feats, 2);
  ASSERT_TRUE(sp);
  EXPECT_EQ(sp->feature, 0u);
  EXPECT_EQ(sp->threshold, 1.5);
  const std::vector<std::size_t> reversed{1, 0};
  EXPECT_EQ(best_split(s, rows, reversed, 2)->feature, 0u);
}

TEST(BestSplit, GainIsNeverNegative) {
  Rng rng(2);
  for (int rep = 0; rep < 200; ++rep) {
    const auto s = small_integer_set(rng, 12, 3, 3);
    std::vector<std::size_t> rows(12), feats{0, 1, 2};
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    if (const auto sp = best_split(s, rows, feats, 3)) EXPECT_GT(sp->gain, 0.0);
  }
}

TEST(Tree, MatchesExhaustiveCartOracle) {
  Rng rng(3);
  for (int rep = 0; rep < 300; ++rep) {
    const auto s = small_integer_set(rng, 6, 1 + rng.below(3), 2 + static_cast<int>(rng.below(2)));
    const int k = 3;
    Rng unused(0);
    const auto tree = fit_tree(s, k, TreeParams{s.dims(), -1, 2}, unused);
    std::vector<std::size_t> rows(6);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    std::vector<OracleNode> oracle;
    oracle_grow(s, rows, k, oracle);
    ASSERT_EQ(tree.nodes.size(), oracle.size()) << "rep " << rep;
    for (std::size_t i = 0; i < oracle.size(); ++i) {
      EXPECT_EQ(tree.nodes[i].feature, oracle[i].feature) << "rep " << rep << " node " << i;
      EXPECT_EQ(tree.nodes[i].threshold, oracle[i].threshold) << "rep " << rep << " node " << i;
      EXPECT_EQ(tree.nodes[i].counts, oracle[i].counts) << "rep " << rep << " node " << i;
      EXPECT_EQ(tree.nodes[i].label, oracle[i].label) << "rep " << rep << " node " << i;
    }
  }
}

TEST(Tree, SeparableOneDimensional) {
  LabeledSet s;
  for (int i = 0; i < 10; ++i) {
    s.x.push_back({static_cast<double>(i)});
    s.y.push_back(i < 4 ? 0 : 1);
  }
  Rng rng(4);
  const auto t = fit_tree(s, 2, TreeParams{}, rng);
  EXPECT_EQ(t.depth(), 1u);
  EXPECT_EQ(t.nodes[0].threshold, 3.5);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(t.predict(s.x[i]), s.y[i]);
}

TEST(Tree, DepthLimits) {
  Rng rng(5);
  const auto s = small_integer_set(rng, 60, 3, 3);
  Rng r0(1);
  const auto stump = fit_tree(s, 3, TreeParams{0, 0, 2}, r0);
  ASSERT_EQ(stump.nodes.size(), 1u);
  EXPECT_EQ(stump.nodes[0].label, majority(stump.nodes[0].counts));
  for (int depth : {1, 2, 3}) {
    Rng r(2);
    EXPECT_LE(fit_tree(s, 3, TreeParams{0, depth, 2}, r).depth(), static_cast<std::size_t>(depth));
  }
  Rng r3(3);
  const auto big_min = fit_tree(s, 3, TreeParams{0, -1, 1000}, r3);
  EXPECT_EQ(big_min.nodes.size(), 1u);
}

TEST(Tree, LeavesAreNonEmptyAndThresholdsFinite) {
  Rng rng(6);
  const auto s = blobs(40, 4, 3, 1.0, 1.0, 6);
  const auto t = fit_tree(s, 3, TreeParams{2, -1, 2}, rng);
  for (const auto& n : t.nodes) {
    EXPECT_GT(std::accumulate(n.counts.begin(), n.counts.end(), 0u), 0u);
    if (!n.is_leaf()) {
      EXPECT_TRUE(std::isfinite(n.threshold));
      EXPECT_GT(n.left, 0);
      EXPECT_GT(n.right, n.left);
    }
  }
}

TEST(Forest, SingleUnbaggedTreeEqualsFitTree) {
  const auto s = blobs(30, 5, 3, 1.0, 1.0, 7);
  ForestParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  p.max_features = 5;
  const auto f = fit_forest(s, 3, p, 99);
  Rng rng(derive_seed(99, 0));
  const auto t = fit_tree(s, 3, TreeParams{5, -1, 2}, rng);
  EXPECT_EQ(f.trees[0], t);
  for (const auto& x : s.x) EXPECT_EQ(predict_forest(f, x), t.predict(x));
}

TEST(Forest, HeldOutBlobsAndOob) {
  const auto train = blobs(100, 6, 3, 6.0, 1.0, 8);
  const auto test = blobs(100, 6, 3, 6.0, 1.0, 9);
  ForestParams p;
  p.n_trees = 100;
  const auto f = fit_forest(train, 3, p, 42);
  EXPECT_EQ(f.max_features, 3u);
  std::vector<int> pred;
  for (const auto& x : test.x) pred.push_back(predict_forest(f, x));
  EXPECT_GE(accuracy_of(test.y, pred), 0.99);

  Rng rng(10);
  const auto single = fit_tree(train, 3, TreeParams{}, rng);
  pred.clear();
  for (const auto& x : test.x) pred.push_back(single.predict(x));
  const double tree_acc = accuracy_of(test.y, pred);
  EXPECT_GE(f.oob_accuracy, tree_acc - 0.10);
  EXPECT_LE(f.oob_accuracy, 1.0);
}

TEST(Forest, DeterministicAcrossRunsAndThreads) {
  const auto s = blobs(40, 8, 3, 1.0, 1.0, 11);
  ForestParams p;
  p.n_trees = 20;
  const auto a = fit_forest(s, 3, p, 7);
  p.threads = 4;
  const auto b = fit_forest(s, 3, p, 7);
  const auto c = fit_forest(s, 3, p, 8);
  EXPECT_EQ(a.trees, b.trees);
  EXPECT_EQ(a.oob_accuracy, b.oob_accuracy);
  EXPECT_NE(a.trees, c.trees);
}

TEST(Forest, MonotoneTransformInvariance) {
  const auto s = blobs(40, 4, 3, 1.0, 1.0, 12);
  auto warped = s;
  for (auto& x : warped.x) {
    x[0] = std::exp(x[0]);
    x[1] = x[1] * x[1] * x[1];
    x[2] = -1.0 / (1.0 + std::exp(-x[2])) * -3.0 + 2.0;
    x[3] = 10.0 * x[3] - 4.0;
  }
  ForestParams p;
  p.n_trees = 15;
  const auto a = fit_forest(s, 3, p, 5);
  const auto b = fit_forest(warped, 3, p, 5);
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    ASSERT_EQ(a.trees[t].nodes.size(), b.trees[t].nodes.size());
    for (std::size_t i = 0; i < a.trees[t].nodes.size(); ++i) {
      EXPECT_EQ(a.trees[t].nodes[i].feature, b.trees[t].nodes[i].feature);
      EXPECT_EQ(a.trees[t].nodes[i].counts, b.trees[t].nodes[i].counts);
    }
  }
  for (std::size_t i = 0; i < s.size(); ++i) EXPECT_EQ(predict_forest(a, s.x[i]), predict_forest(b, warped.x[i]));
}

TEST(Forest, VoteTiesGoLow) {
  EXPECT_EQ(majority(Counts{2, 2, 1}), 0);
  EXPECT_EQ(majority(Counts{1, 3, 3}), 1);
  EXPECT_EQ(majority(Counts{0, 0, 0}), 0);
}

TEST(Forest, Errors) {
  LabeledSet s;
  ForestParams p;
  EXPECT_THROW(fit_forest(s, 3, p, 1), PreconditionError);
  s.x = {{1.0}};
  s.y = {0};
  p.n_trees = 0;
  EXPECT_THROW(fit_forest(s, 3, p, 1), PreconditionError);
}
