#include "fixtures.hpp"

#include "frugalnn/cbctree.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>
#include <sstream>

using namespace frugalnn;
using frugalnn::testing::rows;
using frugalnn::testing::shared;

namespace {

std::vector<int> iota_vec(int n) {
  std::vector<int> v(static_cast<std::size_t>(n));
  std::iota(v.begin(), v.end(), 0);
  return v;
}

// 2x2 grid of three-point blobs; a third coordinate is noise. Hand-written
// tree: f0 at the root, f1 below on the left, f2 below on the right.
Matrix grid_points() {
  return rows({{0.10, 0.10, 0.3},
               {0.12, 0.11, 0.6},
               {0.11, 0.13, 0.2},
               {0.10, 0.90, 0.5},
               {0.13, 0.88, 0.4},
               {0.11, 0.91, 0.9},
               {0.90, 0.10, 0.1},
               {0.88, 0.12, 0.2},
               {0.91, 0.11, 0.15},
               {0.90, 0.90, 0.8},
               {0.89, 0.92, 0.85},
               {0.92, 0.90, 0.9}});
}

nlohmann::json grid_tree_json() {
  auto split = [](int f, double v, int l, int r) {
    return nlohmann::json{{"leaf", false}, {"feature", f}, {"value", v}, {"reward", 0.1}, {"left", l}, {"right", r}};
  };
  auto leaf = [](std::vector<int> pts) { return nlohmann::json{{"leaf", true}, {"points", pts}}; };
  return {{"format", "cbctree"},
          {"version", 1},
          {"n_points", 12},
          {"n_features", 3},
          {"params", {{"tau", 3}, {"alpha", 1.0}, {"ell", 20}, {"exclude_path_features", false}}},
          {"nodes",
           {split(0, 0.5, 1, 4), split(1, 0.5, 2, 3), leaf({0, 1, 2}), leaf({3, 4, 5}), split(2, 0.5, 5, 6),
            leaf({6, 7, 8}), leaf({9, 10, 11})}}};
}

CBCTree grid_tree() { return CBCTree::from_json(grid_tree_json(), shared(grid_points())); }

std::vector<int> sorted(std::vector<int> v) {
  std::sort(v.begin(), v.end());
  return v;
}

// Independent re-evaluation of the best boundary reward at a node.
double best_reward_by_enumeration(const Matrix& data, const std::vector<int>& subset, const CostSchedule& sched,
                                  const TreeParams& params, const FeatureSet& path) {
  double best = 0.0;
  for (int f = 0; f < data.cols(); ++f) {
    if (params.exclude_path_features && path.contains(f)) continue;
    double lo = 1e300, hi = -1e300;
    for (int i : subset) {
      lo = std::min(lo, data(i, f));
      hi = std::max(hi, data(i, f));
    }
    for (int j = 1; j <= params.ell; ++j) {
      const double v = lo + (hi - lo) * j / (params.ell + 1);
      std::vector<int> l, r;
      for (int i : subset) (data(i, f) < v ? l : r).push_back(i);
      if (l.empty() || r.empty()) continue;
      auto delta = [&](const std::vector<int>& s) {
        RowVector c = RowVector::Zero(data.cols());
        for (int i : s) c += data.row(i);
        c /= static_cast<double>(s.size());
        double sum = 0.0;
        for (int i : s) sum += (data.row(i) - c).norm();
        return sum / static_cast<double>(s.size());
      };
      const double n = static_cast<double>(subset.size());
      const double score = delta(subset) - (l.size() / n * delta(l) + r.size() / n * delta(r));
      const double cost = path.contains(f) ? 0.0 : sched.cost(f);
      best = std::max(best, (1.0 - params.alpha * cost) * score);
    }
  }
  return best;
}

void check_tree(const CBCTree& tree, const CostSchedule& sched) {
  const Matrix& data = tree.data();
  // leaves partition the training set
  std::vector<int> all;
  for (int l : tree.leaves()) {
    const auto& pts = tree.node(l).points;
    all.insert(all.end(), pts.begin(), pts.end());
  }
  EXPECT_EQ(sorted(all), iota_vec(static_cast<int>(data.rows())));

  std::function<void(int, FeatureSet)> rec = [&](int i, FeatureSet path) {
    const TreeNode& n = tree.node(i);
    if (n.is_leaf()) {
      if (static_cast<int>(n.points.size()) > tree.params().tau)
        EXPECT_LE(best_reward_by_enumeration(data, n.points, sched, tree.params(), path), 1e-12);
      return;
    }
    for (int p : tree.node(n.left).points) EXPECT_LT(data(p, n.boundary.feature), n.boundary.value);
    for (int p : tree.node(n.right).points) EXPECT_GE(data(p, n.boundary.feature), n.boundary.value);
    EXPECT_NEAR(n.reward, best_reward_by_enumeration(data, n.points, sched, tree.params(), path), 1e-12);
    const auto s = split_score(data, n.points, n.boundary);
    ASSERT_TRUE(s.has_value());
    EXPECT_LE(*s, average_centroid_distance(data, n.points) + 1e-15);
    if (tree.params().exclude_path_features) EXPECT_FALSE(path.contains(n.boundary.feature));
    path.insert(n.boundary.feature);
    rec(n.left, path);
    rec(n.right, path);
  };
  rec(0, FeatureSet(static_cast<int>(data.cols())));
}

}  // namespace

TEST(SplitScore, Examples) {
  const Matrix four = rows({{0}, {0}, {1}, {1}});
  const auto all4 = iota_vec(4);
  EXPECT_DOUBLE_EQ(average_centroid_distance(four, all4), 0.5);
  EXPECT_DOUBLE_EQ(*split_score(four, all4, {0, 0.5}), 0.5);

  const Matrix three = rows({{0}, {0.5}, {1}});
  EXPECT_NEAR(*split_score(three, iota_vec(3), {0, 0.25}), 1.0 / 6.0, 1e-15);
}

TEST(SplitScore, IdenticalPointsAndEmptySides) {
  const Matrix same = rows({{0.4, 0.2}, {0.4, 0.2}});
  EXPECT_EQ(average_centroid_distance(same, iota_vec(2)), 0.0);
  EXPECT_FALSE(split_score(same, iota_vec(2), {0, 0.4}).has_value());
  EXPECT_FALSE(split_score(same, iota_vec(2), {1, 0.9}).has_value());
  const Matrix pair = rows({{0.0, 0.2}, {1.0, 0.2}});
  EXPECT_DOUBLE_EQ(*split_score(pair, iota_vec(2), {0, 0.5}), 0.5);
}

TEST(SplitReward, Examples) {
  const Matrix four = rows({{0, 0}, {0, 0}, {1, 0}, {1, 0}});
  const auto all4 = iota_vec(4);
  const CostSchedule half = make_cost_schedule({0.5, 0.5}, {});
  EXPECT_DOUBLE_EQ(*split_reward(four, all4, {0, 0.5}, half, 1.0, FeatureSet(2)), 0.25);
  EXPECT_DOUBLE_EQ(*split_reward(four, all4, {0, 0.5}, half, 1.0, FeatureSet::of(2, {0})), 0.5);
  const CostSchedule full = make_cost_schedule({1.0, 1.0}, {});
  EXPECT_EQ(*split_reward(four, all4, {0, 0.5}, full, 1.0, FeatureSet(2)), 0.0);
}

TEST(CandidateThresholds, InteriorEvenGrid) {
  const auto t = candidate_thresholds(0.0, 1.0, 4);
  ASSERT_EQ(t.size(), 4u);
  EXPECT_DOUBLE_EQ(t[0], 0.2);
  EXPECT_DOUBLE_EQ(t[3], 0.8);
}

TEST(Build, SmallSetIsSingleLeaf) {
  std::mt19937_64 rng(1);
  const CBCTree tree = CBCTree::build(shared(frugalnn::testing::random_points(10, 3, rng)), CostSchedule::uniform(3), {});
  EXPECT_EQ(tree.nodes().size(), 1u);
  EXPECT_TRUE(tree.root().is_leaf());
  EXPECT_EQ(tree.pretty().find('\n'), tree.pretty().size() - 1);  // exactly one line
}

TEST(Build, Fig3StyleFixture) {
  const CBCTree tree = CBCTree::build(shared(frugalnn::testing::fig3_points()), CostSchedule::uniform(2), {});
  ASSERT_FALSE(tree.root().is_leaf());
  EXPECT_EQ(tree.root().boundary.feature, 1);
  EXPECT_EQ(tree.node(tree.root().left).points.size(), 20u);
  EXPECT_EQ(tree.node(tree.root().right).points.size(), 20u);
  for (const auto& n : tree.nodes())
    if (!n.is_leaf()) EXPECT_EQ(n.boundary.feature, 1) << "x used as a boundary";
  EXPECT_EQ(tree.depth(), 2);
  EXPECT_EQ(tree.leaves().size(), 4u);

  const std::string text = tree.pretty({"x", "y"});
  std::istringstream in(text);
  int splits = 0, leaves = 0;
  for (std::string line; std::getline(in, line);) {
    if (line.find("split") != std::string::npos) ++splits;
    if (line.find("leaf") != std::string::npos) ++leaves;
    EXPECT_EQ(line.find(" x <"), std::string::npos);
  }
  EXPECT_EQ(splits, 3);
  EXPECT_EQ(leaves, 4);
  EXPECT_EQ(text.rfind("split #0 y < ", 0), 0u) << text;
}

TEST(Build, TwoOneDimensionalBlobs) {
  Matrix m(40, 1);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> j(0.0, 0.03);
  for (int i = 0; i < 20; ++i) {
    m(i, 0) = j(rng);
    m(20 + i, 0) = 1.0 - j(rng);
  }
  // the lone feature costs 1, so alpha 1 would make every split worthless
  TreeParams params;
  params.alpha = 0.5;
  const CBCTree tree = CBCTree::build(shared(m), CostSchedule::uniform(1), params);
  // every threshold in the gap gives the same 20/20 split; the first one on the grid is kept
  const double lo = m.col(0).minCoeff(), hi = m.col(0).maxCoeff();
  const double left_max = m.col(0).head(20).maxCoeff();
  double first = 0.0;
  for (int j = 1; j <= params.ell; ++j) {
    first = lo + (hi - lo) * j / (params.ell + 1);
    if (first > left_max) break;
  }
  EXPECT_NEAR(tree.root().boundary.value, first, 1e-12);
  EXPECT_EQ(tree.node(tree.root().left).points.size(), 20u);
  EXPECT_EQ(tree.node(tree.root().right).points.size(), 20u);
  for (int l : tree.leaves()) {
    const auto& n = tree.node(l);
    if (n.points.size() > 10u) EXPECT_LE(best_reward_by_enumeration(m, n.points, CostSchedule::uniform(1), params, FeatureSet::all(1)), 1e-12);
  }
  check_tree(tree, CostSchedule::uniform(1));
}

TEST(Build, ChosenBoundaryIsBestOnBlobs) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const Split sp = frugalnn::testing::blob_split(seed, 150);
    const CostSchedule sched = make_cost_schedule({0.05, 0.1, 0.2, 0.3, 0.05, 0.1, 0.1, 0.1}, {});
    for (bool exclude : {false, true}) {
      TreeParams params;
      params.exclude_path_features = exclude;
      check_tree(CBCTree::build(shared(sp.train.rows), sched, params), sched);
    }
  }
}

TEST(Build, AlphaZeroIgnoresCosts) {
  const Split sp = frugalnn::testing::blob_split(2, 150);
  TreeParams params;
  params.alpha = 0.0;
  auto pts = shared(sp.train.rows);
  const CBCTree a = CBCTree::build(pts, CostSchedule::uniform(8), params);
  const CBCTree b = CBCTree::build(pts, make_cost_schedule({1, 0.9, 0.1, 0.5, 0.3, 0.7, 0.2, 0.6}, {}), params);
  EXPECT_EQ(a.to_json(), b.to_json());
}

TEST(Build, InvalidParams) {
  auto pts = shared(rows({{0.0}, {1.0}}));
  TreeParams p;
  p.ell = 1;
  EXPECT_THROW(CBCTree::build(pts, CostSchedule::uniform(1), p), UsageError);
  EXPECT_THROW(CBCTree::build(pts, CostSchedule::uniform(2), {}), DataError);
}

TEST(Reachable, WithFeature) {
  const CBCTree tree = grid_tree();
  const RowVector p = rows({{0.1, 0.2, 0.3}}).row(0);
  EXPECT_EQ(tree.reachable_with_feature(p, FeatureSet::of(3, {0}), 1), (std::vector<int>{2, 3}));
  EXPECT_EQ(tree.reachable_with_feature(p, FeatureSet(3), 0), (std::vector<int>{1, 4}));
  EXPECT_EQ(tree.reachable_with_feature(p, FeatureSet::of(3, {0, 1}), 2), (std::vector<int>{2}));
  EXPECT_EQ(tree.reachable_with_feature(p, FeatureSet(3), 2), (std::vector<int>{0}));
}

TEST(Reachable, All) {
  const CBCTree tree = grid_tree();
  const RowVector p = rows({{0.1, 0.2, 0.3}}).row(0);
  EXPECT_EQ(tree.reachable_all(p, FeatureSet::all(3)), (std::vector<int>{2}));
  EXPECT_EQ(tree.reachable_all(p, FeatureSet(3)), (std::vector<int>{2, 3, 5, 6}));
  EXPECT_EQ(tree.reachable_all(p, FeatureSet::of(3, {0})), (std::vector<int>{2, 3}));
}

TEST(Reachable, TrainingPointsLandInTheirLeafAndKnowledgeNarrows) {
  const Split sp = frugalnn::testing::blob_split(5, 200);
  const CBCTree tree = CBCTree::build(shared(sp.train.rows), CostSchedule::uniform(8), {});
  std::mt19937_64 rng(5);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < sp.train.size(); ++i) {
    const auto leaf = tree.reachable_all(sp.train.rows.row(i), FeatureSet::all(8));
    ASSERT_EQ(leaf.size(), 1u);
    const auto& pts = tree.node(leaf[0]).points;
    EXPECT_TRUE(std::binary_search(pts.begin(), pts.end(), i));

    FeatureSet b(8);
    for (int f = 0; f < 8; ++f)
      if (coin(rng)) b.insert(f);
    FeatureSet a(8);
    for (int f : b.indices())
      if (coin(rng)) a.insert(f);
    // every point under a node reached with B is under some node reached with A
    auto covered = [&](const std::vector<int>& nodes) {
      std::set<int> s;
      for (int n : nodes) s.insert(tree.node(n).points.begin(), tree.node(n).points.end());
      return s;
    };
    const auto wide = covered(tree.reachable_all(sp.train.rows.row(i), a));
    for (int q : covered(tree.reachable_all(sp.train.rows.row(i), b))) EXPECT_TRUE(wide.count(q));
  }
}

TEST(Similarity, Examples) {
  const CBCTree single = CBCTree::from_json(
      {{"format", "cbctree"},
       {"version", 1},
       {"n_points", 1},
       {"n_features", 1},
       {"params", {{"tau", 10}, {"alpha", 1.0}, {"ell", 20}, {"exclude_path_features", false}}},
       {"nodes", {{{"leaf", true}, {"points", {0}}}}}},
      shared(rows({{1.0}})));
  EXPECT_DOUBLE_EQ(single.similarity(0, RowVector::Zero(1), FeatureSet::all(1), 1), 1.0);
  EXPECT_DOUBLE_EQ(single.similarity(0, RowVector::Ones(1), FeatureSet::all(1), 1), 1.0 / kSimilarityFloor);

  auto pts = shared(rows({{-2.0}, {2.0}, {10.0}, {11.0}}));
  const CBCTree two = CBCTree::from_json(
      {{"format", "cbctree"},
       {"version", 1},
       {"n_points", 4},
       {"n_features", 1},
       {"params", {{"tau", 2}, {"alpha", 1.0}, {"ell", 20}, {"exclude_path_features", false}}},
       {"nodes",
        {{{"leaf", false}, {"feature", 0}, {"value", 5.0}, {"reward", 1.0}, {"left", 1}, {"right", 2}},
         {{"leaf", true}, {"points", {0, 1}}},
         {{"leaf", true}, {"points", {2, 3}}}}}},
      pts);
  EXPECT_DOUBLE_EQ(two.similarity(1, RowVector::Zero(1), FeatureSet::all(1), 4), 0.5);
  EXPECT_EQ(two.predict_cluster(RowVector::Constant(1, 3.0), FeatureSet::all(1)), 1);
}

TEST(Suggest, FollowsTraversal) {
  const CBCTree tree = grid_tree();
  const CostSchedule sched = CostSchedule::uniform(3);
  const RowVector p = rows({{0.1, 0.2, 0.3}}).row(0);
  EXPECT_EQ(tree.suggest(p, FeatureSet(3), sched, 1.0), Action::reveal(0));
  EXPECT_EQ(tree.suggest(p, FeatureSet::of(3, {0}), sched, 1.0), Action::reveal(1));
  EXPECT_EQ(tree.suggest(p, FeatureSet::of(3, {0, 1}), sched, 1.0), Action::terminate());
  const RowVector q = rows({{0.8, 0.2, 0.3}}).row(0);
  EXPECT_EQ(tree.suggest(q, FeatureSet::of(3, {0}), sched, 1.0), Action::reveal(2));
  EXPECT_EQ(tree.suggest(p, FeatureSet(3), sched, 0.1), Action::terminate());
}

TEST(Suggest, UnaffordableRootFallsBackToExpectedSimilarity) {
  const CBCTree tree = grid_tree();
  const CostSchedule sched = make_cost_schedule({0.9, 0.2, 0.3}, {});
  const RowVector p = rows({{0.1, 0.2, 0.3}}).row(0);
  const FeatureSet none(3);
  // brute force over the affordable alternatives
  int best = -1;
  double best_sum = -1.0;
  for (int f : {1, 2}) {
    const auto nodes = tree.reachable_with_feature(p, none, f);
    int total = 0;
    for (int n : nodes) total += static_cast<int>(tree.node(n).points.size());
    double sum = 0.0;
    for (int n : nodes) {
      double d = 0.0;
      for (int i : tree.node(n).points) d += partial_distance(p, tree.data().row(i), none);
      sum += 1.0 / std::max(d * tree.node(n).points.size() / total, kSimilarityFloor);
    }
    if (sum > best_sum) {
      best = f;
      best_sum = sum;
    }
  }
  EXPECT_EQ(tree.suggest(p, none, sched, 0.5), Action::reveal(best));
  EXPECT_EQ(tree.suggest(p, none, sched, 0.25), Action::reveal(1));
  EXPECT_EQ(tree.suggest(p, FeatureSet::of(3, {1}), sched, 0.35), Action::reveal(2));
}

TEST(PredictCluster, Examples) {
  const CBCTree tree = grid_tree();
  const RowVector p = rows({{0.85, 0.95, 0.7}}).row(0);
  EXPECT_EQ(tree.predict_cluster(p, FeatureSet::all(3)), 6);
  // no information: all similarities hit the floor; all leaves are size 3, so the leftmost wins
  EXPECT_EQ(tree.predict_cluster(p, FeatureSet(3)), 2);
  // f1 only: leaves 2, 5 and 6 are reachable; leaf 5 sums to 0.03 against 0.04 for leaf 2
  EXPECT_EQ(tree.predict_cluster(rows({{0.0, 0.12, 0.0}}).row(0), FeatureSet::of(3, {1})), 5);
  EXPECT_EQ(tree.predict_cluster(rows({{0.0, 0.89, 0.0}}).row(0), FeatureSet::of(3, {1})), 3);
}

TEST(PredictCluster, LargestLeafWinsWithoutInformation) {
  const CBCTree tree = CBCTree::build(shared(frugalnn::testing::fig3_points()), CostSchedule::uniform(2), [] {
    TreeParams p;
    p.tau = 15;
    return p;
  }());
  const auto leaves = tree.leaves();
  int largest = leaves.front();
  for (int l : leaves)
    if (tree.node(l).points.size() > tree.node(largest).points.size()) largest = l;
  EXPECT_EQ(tree.predict_cluster(RowVector::Zero(2), FeatureSet(2)), largest);
}

TEST(TreeJson, RoundTrip) {
  const Split sp = frugalnn::testing::blob_split(1, 150);
  auto pts = shared(sp.train.rows);
  const CBCTree tree = CBCTree::build(pts, CostSchedule::uniform(8), {});
  const CBCTree back = CBCTree::from_json(nlohmann::json::parse(tree.to_json().dump()), pts);
  ASSERT_EQ(back.nodes().size(), tree.nodes().size());
  for (std::size_t i = 0; i < tree.nodes().size(); ++i) {
    EXPECT_EQ(back.nodes()[i].points, tree.nodes()[i].points);
    EXPECT_EQ(back.nodes()[i].boundary.value, tree.nodes()[i].boundary.value);
    EXPECT_EQ(back.nodes()[i].centroid, tree.nodes()[i].centroid);
  }
  EXPECT_EQ(back.pretty(), tree.pretty());
}

TEST(TreeJson, CorruptFiles) {
  auto pts = shared(grid_points());
  auto j = grid_tree_json();
  j["format"] = "other";
  EXPECT_THROW(CBCTree::from_json(j, pts), DataError);
  j = grid_tree_json();
  j["nodes"][6]["points"] = {9, 10};  // point 11 in no leaf
  EXPECT_THROW(CBCTree::from_json(j, pts), DataError);
  j = grid_tree_json();
  j["nodes"][0]["left"] = 0;
  EXPECT_THROW(CBCTree::from_json(j, pts), DataError);
  j = grid_tree_json();
  j["nodes"][0].erase("value");
  EXPECT_THROW(CBCTree::from_json(j, pts), DataError);
  EXPECT_THROW(CBCTree::from_json(grid_tree_json(), shared(rows({{0.0, 0.0, 0.0}}))), DataError);
}
