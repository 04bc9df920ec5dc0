#include "tamrf/error.hpp"
#include "tamrf/forest.hpp"
#include "tamrf/metrics.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace tamrf;
using Eigen::Index;

namespace {

std::vector<Index> all_rows(Index n) {
  std::vector<Index> r(static_cast<std::size_t>(n));
  std::iota(r.begin(), r.end(), Index{0});
  return r;
}

std::vector<Index> all_features(Index p) { return all_rows(p); }

// Grid-valued random table, mimicking survey responses.
void random_table(Rng& rng, Index n, Index p, Eigen::MatrixXd& x, Eigen::VectorXd& y) {
  x.resize(n, p);
  y.resize(n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < p; ++j) x(i, j) = -100.0 + 25.0 * static_cast<double>(uniform_index(rng, 9));
    y(i) = -100.0 + 25.0 * static_cast<double>(uniform_index(rng, 9));
  }
}

}  // namespace

TEST(BestSplit, HandExample) {
  Eigen::MatrixXd x(4, 1);
  x << 1, 2, 3, 4;
  Eigen::VectorXd y(4);
  y << 0, 0, 10, 10;
  const auto rows = all_rows(4);
  const auto feats = all_features(1);
  const auto s = best_split(x, y, rows, feats);
  ASSERT_TRUE(s.has_value());
  EXPECT_EQ(s->feature, 0);
  EXPECT_DOUBLE_EQ(s->threshold, 2.5);
  EXPECT_NEAR(s->sse_decrease, 100.0, 1e-12);
}

TEST(BestSplit, ConstantTargetHasNoSplit) {
  Eigen::MatrixXd x(4, 2);
  x << 1, 4, 2, 3, 3, 2, 4, 1;
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(4, 25.0);
  EXPECT_FALSE(best_split(x, y, all_rows(4), all_features(2)).has_value());
}

TEST(BestSplit, PicksSignalFeatureOverNoise) {
  Eigen::MatrixXd x(8, 2);
  // Column 0 is noise, column 1 carries the target.
  x << 3, 1, 1, 2, 4, 3, 2, 4, 1, 5, 4, 6, 2, 7, 3, 8;
  Eigen::VectorXd y(8);
  y << -50, -50, -50, -50, 50, 50, 50, 50;
  const auto rows = all_rows(8);
  const auto s = best_split(x, y, rows, all_features(2));
  const auto o = oracle::best_split(x, y, rows);
  ASSERT_TRUE(s && o);
  EXPECT_EQ(s->feature, 1);
  EXPECT_EQ(s->feature, o->feature);
  EXPECT_DOUBLE_EQ(s->threshold, o->threshold);
}

TEST(BestSplit, MatchesExhaustiveOracle) {
  auto rng = make_rng(2024, {1});
  for (int trial = 0; trial < 300; ++trial) {
    const Index n = 2 + static_cast<Index>(uniform_index(rng, 11));
    const Index p = 1 + static_cast<Index>(uniform_index(rng, 4));
    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    random_table(rng, n, p, x, y);
    // Bootstrap-style rows with repeats.
    std::vector<Index> rows(static_cast<std::size_t>(n));
    for (auto& r : rows) r = static_cast<Index>(uniform_index(rng, static_cast<std::uint64_t>(n)));
    const std::size_t min_child = 1 + uniform_index(rng, 2);
    const auto s = best_split(x, y, rows, all_features(p), min_child);
    const auto o = oracle::best_split(x, y, rows, min_child);
    ASSERT_EQ(s.has_value(), o.has_value()) << "trial " << trial;
    if (!s) continue;
    EXPECT_EQ(s->feature, o->feature) << "trial " << trial;
    EXPECT_DOUBLE_EQ(s->threshold, o->threshold) << "trial " << trial;
    EXPECT_NEAR(s->sse_decrease, o->decrease, 1e-9 * std::max(1.0, o->decrease)) << "trial " << trial;
  }
}

TEST(BestSplit, RespectsMinChild) {
  Eigen::MatrixXd x(4, 1);
  x << 1, 2, 3, 4;
  Eigen::VectorXd y(4);
  y << 100, 0, 0, 0;
  const auto s = best_split(x, y, all_rows(4), all_features(1), 2);
  ASSERT_TRUE(s);
  EXPECT_DOUBLE_EQ(s->threshold, 2.5);
  EXPECT_FALSE(best_split(x, y, all_rows(4), all_features(1), 3));
}

TEST(Forest, ConstantTargetPredictsConstant) {
  Eigen::MatrixXd x(20, 2);
  for (Index i = 0; i < 20; ++i) x.row(i) << static_cast<double>(i), static_cast<double>(i % 3);
  const Eigen::VectorXd y = Eigen::VectorXd::Constant(20, -25.0);
  ForestConfig cfg;
  cfg.n_trees = 20;
  const auto f = fit_forest(x, y, {"a", "b"}, "y", cfg);
  const Eigen::VectorXd p = f.predict(x);
  for (Index i = 0; i < p.size(); ++i) EXPECT_EQ(p(i), -25.0);
}

TEST(Forest, FitsIdentityWell) {
  Eigen::MatrixXd x(50, 1);
  Eigen::VectorXd y(50);
  for (Index i = 0; i < 50; ++i) x(i, 0) = y(i) = -100.0 + 4.0 * static_cast<double>(i);
  ForestConfig cfg;
  cfg.n_trees = 100;
  cfg.min_node_size = 1;
  cfg.seed = 3;
  const auto f = fit_forest(x, y, {"x"}, "y", cfg);
  EXPECT_LT(rmse(y, f.predict(x)), 0.1 * (y.maxCoeff() - y.minCoeff()));
}

TEST(Forest, PredictionIsMeanOfTrees) {
  auto rng = make_rng(5, {});
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  random_table(rng, 40, 3, x, y);
  ForestConfig cfg;
  cfg.n_trees = 15;
  cfg.seed = 11;
  const auto f = fit_forest(x, y, {"a", "b", "c"}, "y", cfg);
  for (Index i = 0; i < x.rows(); ++i) {
    double sum = 0.0;
    for (const auto& t : f.trees()) sum += t.predict(x.row(i));
    EXPECT_NEAR(f.predict_row(x.row(i)), sum / 15.0, 1e-12);
  }
}

TEST(Forest, LeafMeansReplayAndMinNodeSize) {
  auto rng = make_rng(6, {});
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  random_table(rng, 60, 4, x, y);
  ForestConfig cfg;
  cfg.n_trees = 10;
  cfg.min_node_size = 4;
  cfg.seed = 12;
  const auto f = fit_forest(x, y, {"a", "b", "c", "d"}, "y", cfg);
  for (std::size_t t = 0; t < f.trees().size(); ++t) {
    const auto& tree = f.trees()[t];
    std::vector<double> sum(tree.nodes().size(), 0.0);
    std::vector<std::size_t> count(tree.nodes().size(), 0);
    for (auto r : f.bootstrap()[t]) {
      const auto leaf = static_cast<std::size_t>(tree.leaf_index(x.row(r)));
      sum[leaf] += y(r);
      ++count[leaf];
    }
    for (std::size_t k = 0; k < tree.nodes().size(); ++k) {
      const auto& node = tree.nodes()[k];
      if (!node.is_leaf()) {
        EXPECT_GE(tree.nodes()[static_cast<std::size_t>(node.left)].n_samples, cfg.min_node_size);
        EXPECT_GE(tree.nodes()[static_cast<std::size_t>(node.right)].n_samples, cfg.min_node_size);
        continue;
      }
      ASSERT_EQ(count[k], node.n_samples);
      EXPECT_NEAR(node.value, sum[k] / static_cast<double>(count[k]), 1e-9);
    }
  }
}

TEST(Forest, RoutesLeftAtThreshold) {
  // A3 <= -12.5 -> PR7 <= -87.5 -> T5 <= -25 -> leaf -75.
  std::vector<TreeNode> nodes(7);
  nodes[0] = {0, -12.5, 1, 6, 0, 10, 1};
  nodes[1] = {1, -87.5, 2, 5, 0, 6, 1};
  nodes[2] = {2, -25.0, 3, 4, 0, 4, 1};
  nodes[3] = {-1, 0, -1, -1, -75.0, 2, 0};
  nodes[4] = {-1, 0, -1, -1, -10.0, 2, 0};
  nodes[5] = {-1, 0, -1, -1, 20.0, 2, 0};
  nodes[6] = {-1, 0, -1, -1, 60.0, 4, 0};
  const Forest f("BI4", {"A3", "PR7", "T5"}, {}, {RegressionTree(nodes)}, {});
  const std::vector<double> row{-12.5, -87.5, -25.0};
  EXPECT_EQ(predict(f, row), -75.0);
  const std::vector<double> right{-12.4, -87.5, -25.0};
  EXPECT_EQ(predict(f, right), 60.0);
  const std::vector<double> missing{std::nan(""), 0, 0};
  EXPECT_THROW(predict(f, missing), DataError);
}

TEST(Forest, TwoTreeMean) {
  const RegressionTree a({TreeNode{-1, 0, -1, -1, 10.0, 1, 0}});
  const RegressionTree b({TreeNode{-1, 0, -1, -1, 20.0, 1, 0}});
  const Forest f("y", {"x"}, {}, {a, b}, {});
  const std::vector<double> row{0.0};
  EXPECT_EQ(predict(f, row), 15.0);
}

TEST(Forest, DeterministicAcrossWorkers) {
  auto rng = make_rng(7, {});
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  random_table(rng, 80, 5, x, y);
  ForestConfig cfg;
  cfg.n_trees = 40;
  cfg.mtry = 2;
  cfg.seed = 99;
  const std::vector<std::string> names{"a", "b", "c", "d", "e"};
  const auto one = to_json(fit_forest(x, y, names, "y", cfg, 1));
  const auto many = to_json(fit_forest(x, y, names, "y", cfg, 8));
  EXPECT_EQ(one, many);
  cfg.seed = 100;
  EXPECT_NE(one, to_json(fit_forest(x, y, names, "y", cfg, 1)));
}

TEST(Forest, JsonRoundTrip) {
  auto rng = make_rng(8, {});
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  random_table(rng, 30, 2, x, y);
  ForestConfig cfg;
  cfg.n_trees = 5;
  cfg.max_depth = 3;
  const auto f = fit_forest(x, y, {"a", "b"}, "y", cfg);
  const auto text = to_json(f);
  const auto g = forest_from_json(text);
  EXPECT_EQ(to_json(g), text);
  EXPECT_EQ(g.predict(x), f.predict(x));
  EXPECT_THROW(forest_from_json("{\"format\": \"other\"}"), Error);
}

TEST(Forest, ConfigValidation) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(5, 2);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(5);
  ForestConfig cfg;
  cfg.mtry = 3;
  EXPECT_THROW(fit_forest(x, y, {"a", "b"}, "y", cfg), ConfigError);
  cfg.mtry = 0;
  EXPECT_THROW(fit_forest(x, y, {}, "y", cfg), ConfigError);
  x(0, 0) = std::nan("");
  EXPECT_THROW(fit_forest(x, y, {"a", "b"}, "y", cfg), DataError);
  EXPECT_EQ(ForestConfig{}.resolved_mtry(29), 9u);
  EXPECT_EQ(ForestConfig{}.resolved_mtry(2), 1u);
}

TEST(Importance, ImpuritySumsAndUnusedFeatures) {
  auto rng = make_rng(9, {});
  Eigen::MatrixXd x(60, 2);
  Eigen::VectorXd y(60);
  for (Index i = 0; i < 60; ++i) {
    x(i, 0) = static_cast<double>(i % 10);
    x(i, 1) = 0.0;  // constant: can never split
    y(i) = 10.0 * x(i, 0) + static_cast<double>(uniform_index(rng, 3));
  }
  ForestConfig cfg;
  cfg.n_trees = 1;
  const auto f = fit_forest(x, y, {"a", "b"}, "y", cfg);
  const auto imp = impurity_importance(f);
  EXPECT_EQ(imp.at("b"), 0.0);
  EXPECT_NEAR(imp.at("a"), f.trees()[0].total_impurity_decrease(), 1e-9);
  const auto perm = permutation_importance(f, test::make_dataset({"a", "b", "y"}, [&] {
    Eigen::MatrixXd m(60, 3);
    m << x, y;
    return m;
  }()), 1, 3);
  EXPECT_LT(std::abs(perm.at("b")), 1e-9);
  EXPECT_GT(perm.at("a"), 0.0);
}

TEST(Importance, SignalBeatsPermutedCopy) {
  auto rng = make_rng(10, {});
  const Index n = 120;
  Eigen::MatrixXd x(n, 2);
  Eigen::VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    x(i, 0) = -100.0 + 25.0 * static_cast<double>(uniform_index(rng, 9));
    y(i) = std::clamp(std::round(x(i, 0) + 10.0 * standard_normal(rng)), -100.0, 100.0);
  }
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index{0});
  shuffle(perm.begin(), perm.end(), rng);
  for (Index i = 0; i < n; ++i) x(i, 1) = x(perm[static_cast<std::size_t>(i)], 0);
  ForestConfig cfg;
  cfg.n_trees = 50;
  cfg.mtry = 2;
  cfg.seed = 4;
  const auto f = fit_forest(x, y, {"signal", "copy"}, "y", cfg);
  const auto imp = impurity_importance(f);
  EXPECT_GT(imp.at("signal"), imp.at("copy"));

  Eigen::MatrixXd m(n, 3);
  m << x, y;
  const auto ds = test::make_dataset({"signal", "copy", "y"}, m);
  const auto p1 = permutation_importance(f, ds, 21, 1);
  const auto p2 = permutation_importance(f, ds, 21, 1, 4);
  EXPECT_EQ(p1, p2);
  EXPECT_GT(p1.at("signal"), 0.0);
}

TEST(Forest, OutOfBagPredictions) {
  auto rng = make_rng(11, {});
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  random_table(rng, 30, 2, x, y);
  ForestConfig cfg;
  cfg.n_trees = 50;
  const auto f = fit_forest(x, y, {"a", "b"}, "y", cfg);
  const auto oob = f.oob_predict(x);
  ASSERT_EQ(oob.size(), 30);
  // Row 0 replayed by hand.
  double sum = 0.0;
  int k = 0;
  for (std::size_t t = 0; t < f.trees().size(); ++t) {
    const auto& b = f.bootstrap()[t];
    if (std::find(b.begin(), b.end(), Index{0}) != b.end()) continue;
    sum += f.trees()[t].predict(x.row(0));
    ++k;
  }
  ASSERT_GT(k, 0);
  EXPECT_NEAR(oob(0), sum / k, 1e-12);
}
