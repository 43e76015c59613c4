#include <gtest/gtest.h>

#include "fixtures.hpp"

using namespace predmarket;

namespace {

Dataset blobs(std::size_t n, std::size_t K, std::size_t F, std::uint64_t seed) {
  Rng rng = make_rng(seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  Dataset d(K, F);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t k = i % K;
    Instance x(F);
    for (std::size_t f = 0; f < F; ++f) x[f] = noise(rng) + (f % K == k ? 1.5 : 0.0);
    d.add(std::move(x), Label::from_index(k));
  }
  return d;
}

}  // namespace

TEST(Tree, SingleClassIsOnePureLeaf) {
  Dataset d(2, 2);
  for (int i = 0; i < 5; ++i) d.add(Instance{double(i), double(-i)}, Label(2));
  const auto tree = train_tree(d, 1);
  ASSERT_EQ(tree.nodes().size(), 1u);
  EXPECT_EQ(tree.leaf_output(0), (ClassifierOutput{0.0, 1.0}));
}

TEST(Tree, TwoPointsSplitOnce) {
  Dataset d(2, 1);
  d.add(Instance{0.0}, Label(1));
  d.add(Instance{1.0}, Label(2));
  const auto tree = train_tree(d, 3);
  ASSERT_EQ(tree.nodes().size(), 3u);
  EXPECT_EQ(tree.nodes()[0].feature, 0u);
  EXPECT_DOUBLE_EQ(tree.nodes()[0].threshold, 0.5);
  EXPECT_EQ(tree.predict(Instance{0.0}), (ClassifierOutput{1.0, 0.0}));
  EXPECT_EQ(tree.predict(Instance{1.0}), (ClassifierOutput{0.0, 1.0}));
}

TEST(Tree, UnsplittableImpureNodeKeepsMixedCounts) {
  Dataset d(2, 1);
  d.add(Instance{1.0}, Label(1));
  d.add(Instance{1.0}, Label(1));
  d.add(Instance{1.0}, Label(1));
  d.add(Instance{1.0}, Label(2));
  const auto tree = train_tree(d, 0);
  ASSERT_EQ(tree.nodes().size(), 1u);
  EXPECT_EQ(tree.leaf_output(0), (ClassifierOutput{0.75, 0.25}));
}

TEST(Tree, EmptyDataThrows) {
  EXPECT_THROW(train_tree(Dataset(2, 1), 0), SpecError);
  EXPECT_THROW(train_forest(Dataset(2, 1), 3, 0), SpecError);
  EXPECT_THROW(train_forest(blobs(10, 2, 2, 0), 0, 0), SpecError);
}

// Every instance lies in exactly one leaf box per tree, and it is the leaf
// that routing reaches. Leaf counts add up to the rows routed there.
TEST(Tree, PartitionAndRouting) {
  const Dataset d = blobs(200, 3, 4, 5);
  const auto forest = train_forest(d, 5, 11);
  const Dataset probe = blobs(300, 3, 4, 99);
  for (const auto& tree : forest) {
    const auto leaves = tree.leaf_domains();
    EXPECT_EQ(leaves.size(), tree.leaf_count());
    auto check = [&](const Instance& x) {
      std::size_t hits = 0, hit_node = 0;
      for (const auto& [node, box] : leaves)
        if (box.contains(x)) {
          ++hits;
          hit_node = node;
        }
      EXPECT_EQ(hits, 1u);
      EXPECT_EQ(hit_node, tree.route(x));
    };
    for (const auto& x : d.instances()) check(x);
    for (const auto& x : probe.instances()) check(x);
  }
  const auto tree = train_tree(d, 7);
  std::vector<double> routed(tree.nodes().size(), 0.0);
  for (const auto& x : d.instances()) routed[tree.route(x)] += 1.0;
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    const auto& n = tree.nodes()[i];
    if (!n.is_leaf()) continue;
    EXPECT_EQ(sum_of(n.counts), routed[i]);
    EXPECT_GT(routed[i], 0.0);
  }
}

TEST(Tree, TrainingPointsReachPureLeavesWhenSeparable) {
  const Dataset d = blobs(100, 2, 3, 2);
  const auto tree = train_tree(d, 4);
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(argmax_class(tree.predict(d.instance(i))), d.label(i).index());
}

TEST(Forest, DefaultTreeCount) { EXPECT_EQ(kDefaultTreeCount, 50u); }

TEST(Forest, SingleTreeIsTreeOnBootstrap) {
  const Dataset d = blobs(80, 2, 3, 1);
  const auto forest = train_forest(d, 1, 13);
  const auto rows = bootstrap_rows(d.size(), 13, 0);
  const auto tree = train_tree(d, rows, derive_seed(13, 1));
  ASSERT_EQ(forest.front().nodes().size(), tree.nodes().size());
  for (const auto& x : d.instances()) EXPECT_EQ(forest_predict(forest, x), tree.predict(x));
}

TEST(Forest, DeterministicAcrossRunsAndThreadCounts) {
  const Dataset d = blobs(150, 3, 4, 3);
  const auto a = train_forest(d, 8, 21, 1);
  const auto b = train_forest(d, 8, 21, 4);
  const auto c = train_forest(d, 8, 22, 1);
  ASSERT_EQ(a.size(), b.size());
  bool differs = false;
  for (std::size_t t = 0; t < a.size(); ++t) {
    ASSERT_EQ(a[t].nodes().size(), b[t].nodes().size());
    for (std::size_t i = 0; i < a[t].nodes().size(); ++i) {
      EXPECT_EQ(a[t].nodes()[i].feature, b[t].nodes()[i].feature);
      EXPECT_EQ(a[t].nodes()[i].threshold, b[t].nodes()[i].threshold);
      EXPECT_EQ(a[t].nodes()[i].counts, b[t].nodes()[i].counts);
    }
    differs |= a[t].nodes().size() != c[t].nodes().size();
  }
  const auto pa = extract_leaf_participants(a), pb = extract_leaf_participants(b);
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t m = 0; m < pa.size(); ++m) EXPECT_EQ(to_descriptor(pa[m].bettor), to_descriptor(pb[m].bettor));
  EXPECT_TRUE(differs);
}

TEST(Forest, AllAgreeingOneHot) {
  Dataset d(2, 1);
  for (int i = 0; i < 10; ++i) d.add(Instance{double(i)}, Label(i < 5 ? 1 : 2));
  const auto forest = train_forest(d, 10, 0);
  // Bootstrap samples can miss the boundary region, so probe far from it.
  EXPECT_EQ(forest_predict(forest, Instance{-5.0}), (ClassifierOutput{1.0, 0.0}));
  EXPECT_EQ(forest_predict(forest, Instance{50.0}), (ClassifierOutput{0.0, 1.0}));
}

TEST(Leaves, OutputsAndCount) {
  std::vector<TreeNode> nodes(3);
  nodes[0].feature = 0;
  nodes[0].threshold = 0.5;
  nodes[0].left = 1;
  nodes[0].right = 2;
  nodes[1].counts = {3.0, 1.0};
  nodes[2].counts = {5.0, 0.0};
  const Forest forest{RandomTree(nodes, 2, 1), RandomTree(nodes, 2, 1)};
  const auto parts = extract_leaf_participants(forest, {}, 0.5);
  ASSERT_EQ(parts.size(), 4u);
  const auto* c0 = parts[0].bettor.active_core(Instance{0.0});
  ASSERT_NE(c0, nullptr);
  EXPECT_EQ(std::get<ConstantBet>(c0->family()).h, (ClassifierOutput{0.75, 0.25}));
  const auto* c1 = parts[1].bettor.active_core(Instance{1.0});
  ASSERT_NE(c1, nullptr);
  EXPECT_EQ(std::get<ConstantBet>(c1->family()).h, (ClassifierOutput{1.0, 0.0}));
  EXPECT_EQ(parts[0].budget, 0.5);
  EXPECT_EQ(parts[1].bettor.active_core(Instance{0.0}), nullptr);
}

TEST(Leaves, InvalidTreeShapeRejected) {
  std::vector<TreeNode> nodes(2);
  nodes[0].feature = 0;
  nodes[0].left = 1;
  nodes[0].right = 5;
  nodes[1].counts = {1.0, 0.0};
  EXPECT_THROW(RandomTree(nodes, 2, 1), SpecError);
}

// The untrained equal-budget constant leaf market prices every instance at
// the forest vote average, with and without the routing index.
TEST(Leaves, MarketEqualsForestVote) {
  const Dataset d = blobs(200, 3, 5, 8);
  auto forest = std::make_shared<const Forest>(train_forest(d, 20, 17));
  const Market indexed = make_leaf_market(forest);
  Market plain(3);
  for (auto& p : extract_leaf_participants(*forest)) plain.add(p.bettor, p.budget);
  std::size_t leaves = 0;
  for (const auto& t : *forest) leaves += t.leaf_count();
  EXPECT_EQ(indexed.size(), leaves);
  const Dataset probe = blobs(300, 3, 5, 123);
  for (const auto& x : probe.instances()) {
    // Independent oracle: average the trees' leaf outputs by hand.
    std::vector<double> vote(3, 0.0);
    for (const auto& t : *forest) {
      std::size_t n = 0;
      while (!t.nodes()[n].is_leaf()) n = x[t.nodes()[n].feature] < t.nodes()[n].threshold ? t.nodes()[n].left : t.nodes()[n].right;
      const auto& c = t.nodes()[n].counts;
      for (std::size_t k = 0; k < 3; ++k) vote[k] += c[k] / sum_of(c) / static_cast<double>(forest->size());
    }
    const auto a = solve_constant_analytic(indexed, x);
    const auto b = solve_constant_analytic(plain, x);
    EXPECT_LE(oracle::max_abs_diff(a.price.values(), vote), 1e-12);
    EXPECT_EQ(a.price.vector(), b.price.vector());
    EXPECT_LE(oracle::max_abs_diff(forest_predict(*forest, x), vote), 1e-12);
  }
}

TEST(Leaves, NeverRejects) {
  const Dataset d = blobs(100, 2, 3, 9);
  auto forest = std::make_shared<const Forest>(train_forest(d, 5, 1));
  const Market m = make_leaf_market(forest, {BetFamily::aggressive, 1.0, 0.01});
  Rng rng(4);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  for (int i = 0; i < 500; ++i) {
    const Instance x{u(rng), u(rng), u(rng)};
    const BetBook book(m, x);
    EXPECT_EQ(book.entries().size(), forest->size());
    EXPECT_NO_THROW(solve_price(book));
  }
}
