#include "tamrf/error.hpp"
#include "tamrf/evaluate.hpp"
#include "tamrf/metrics.hpp"
#include "tamrf/synthetic.hpp"

#include "oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <numeric>

using namespace tamrf;

namespace {

Eigen::VectorXd vec(std::initializer_list<double> v) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double a : v) out(i++) = a;
  return out;
}

std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace

TEST(Metrics, HandExamples) {
  EXPECT_EQ(rmse(vec({1, 2, 3}), vec({1, 2, 3})), 0.0);
  EXPECT_DOUBLE_EQ(rmse(vec({0, 50}), vec({25, 25})), 25.0);
  EXPECT_NEAR(rmse(vec({-100, 0, 100}), vec({-100, 0, 70})), std::sqrt(300.0), 1e-12);
  EXPECT_DOUBLE_EQ(nrmse(vec({0, 50}), vec({25, 25})), 0.5);
  EXPECT_THROW(nrmse(vec({5, 5}), vec({1, 2})), Error);
  EXPECT_THROW(rmse(vec({1, 2}), vec({1})), Error);
  EXPECT_THROW(rmse(Eigen::VectorXd(), Eigen::VectorXd()), Error);
  EXPECT_DOUBLE_EQ(threshold_accuracy(vec({0, 50, -50}), vec({20, 100, -50}), 25), 2.0 / 3.0);
  EXPECT_EQ(threshold_accuracy(vec({-100, 100}), vec({100, -100}), 200), 1.0);
  EXPECT_EQ(threshold_accuracy(vec({3, 4}), vec({3, 4}), 0), 1.0);
}

TEST(Metrics, TableScaleNrmse) {
  // RMSE 34 on a target spanning the full scale.
  Eigen::VectorXd y(2), yhat(2);
  y << -100, 100;
  yhat << -66, 66;
  EXPECT_NEAR(nrmse(y, yhat), 0.17, 1e-12);
}

TEST(Metrics, RandomVectorsAgainstOracle) {
  auto rng = make_rng(31, {});
  for (int trial = 0; trial < 50; ++trial) {
    const auto n = 2 + static_cast<Eigen::Index>(uniform_index(rng, 30));
    Eigen::VectorXd y(n), yhat(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      y(i) = -100.0 + 200.0 * uniform_unit(rng);
      yhat(i) = -100.0 + 200.0 * uniform_unit(rng);
    }
    const auto ys = to_std(y), hs = to_std(yhat);
    EXPECT_NEAR(rmse(y, yhat), oracle::rmse(ys, hs), 1e-12);
    EXPECT_NEAR(nrmse(y, yhat), oracle::nrmse(ys, hs), 1e-12);
    EXPECT_NEAR(nrmse(y, yhat) * (y.maxCoeff() - y.minCoeff()), rmse(y, yhat), 1e-12);
    for (double t : {0.0, 10.0, 25.0, 60.0, 200.0})
      EXPECT_EQ(threshold_accuracy(y, yhat, t), oracle::accuracy(ys, hs, t));
  }
}

TEST(AccuracyCurve, StepAndMonotone) {
  const auto c = accuracy_curve(vec({0}), vec({10}), {0, 5, 10, 15});
  EXPECT_EQ(c.at(5), 0.0);
  EXPECT_EQ(c.at(10), 1.0);
  const auto grid = threshold_grid(25);
  EXPECT_EQ(grid.size(), 9u);
  EXPECT_EQ(threshold_grid(5).size(), 41u);
  auto rng = make_rng(32, {});
  Eigen::VectorXd y(30), yhat(30);
  for (int i = 0; i < 30; ++i) {
    y(i) = -100.0 + 25.0 * static_cast<double>(uniform_index(rng, 9));
    yhat(i) = -100.0 + 200.0 * uniform_unit(rng);
  }
  const auto curve = accuracy_curve(y, yhat, threshold_grid(5));
  double prev = -1.0;
  for (const auto& [t, a] : curve) {
    EXPECT_GE(a, prev);
    prev = a;
  }
  EXPECT_EQ(curve.at(200), 1.0);
  EXPECT_THROW(accuracy_curve(y, yhat, {-1.0}), ConfigError);
  EXPECT_THROW(accuracy_curve(y, yhat, {201.0}), ConfigError);
}

TEST(Baseline, EndpointsAndBand) {
  auto rng = make_rng(33, {});
  Eigen::VectorXd y(47);
  for (int i = 0; i < 47; ++i) y(i) = -100.0 + 25.0 * static_cast<double>(uniform_index(rng, 9));
  const std::vector<double> thresholds{0, 25, 200};
  const auto b = random_baseline(y, 100, thresholds, 77);
  EXPECT_EQ(b.mean_accuracy[0], 0.0);
  EXPECT_EQ(b.mean_accuracy[2], 1.0);
  EXPECT_EQ(b.stddev[2], 0.0);
  EXPECT_GE(b.mean_accuracy[1], 0.18);
  EXPECT_LE(b.mean_accuracy[1], 0.28);

  // Analytic expectation of the window probability for each y.
  double expect = 0.0;
  for (int i = 0; i < 47; ++i)
    expect += (std::min(100.0, y(i) + 25.0) - std::max(-100.0, y(i) - 25.0)) / 200.0;
  expect /= 47.0;
  EXPECT_NEAR(b.mean_accuracy[1], expect, 3.0 * b.stddev[1] / std::sqrt(100.0));

  const auto again = random_baseline(y, 100, thresholds, 77, 4);
  EXPECT_EQ(again.mean_accuracy, b.mean_accuracy);
  EXPECT_EQ(again.stddev, b.stddev);
  EXPECT_THROW(random_baseline(y, 0, thresholds, 1), ConfigError);
}

TEST(Folds, NearEqualContiguousBlocks) {
  const auto folds = assign_folds(23, 10, 5);
  ASSERT_EQ(folds.size(), 23u);
  std::vector<int> size(10, 0);
  for (auto f : folds) ++size[f];
  EXPECT_EQ(*std::max_element(size.begin(), size.end()) - *std::min_element(size.begin(), size.end()), 1);
  EXPECT_EQ(folds, assign_folds(23, 10, 5));
  EXPECT_THROW(assign_folds(5, 10, 1), Error);
  EXPECT_THROW(assign_folds(5, 1, 1), ConfigError);
}

TEST(MtryGrid, Defaults) {
  EXPECT_EQ(default_mtry_grid(29), (std::vector<std::size_t>{2, 9, 14, 29}));
  EXPECT_EQ(default_mtry_grid(3), (std::vector<std::size_t>{1, 2, 3}));
  EXPECT_EQ(default_mtry_grid(1), (std::vector<std::size_t>{1}));
}

class CrossValidation : public ::testing::Test {
 protected:
  void SetUp() override {
    schema_ = test::sav_schema();
    auto ds = generate_synthetic(SyntheticSpec{}, schema_, 41);
    const auto cols = schema_.item_columns();
    data_ = complete_cases(ds, cols);
  }
  ConstructSchema schema_;
  Dataset data_;
};

TEST_F(CrossValidation, SingletonGridAndMinimum) {
  const auto preds = schema_.internal_predictors("A");
  ForestConfig cfg;
  cfg.n_trees = 20;
  const auto single = cross_validate(data_, "A7", preds, {3}, 5, cfg, 1);
  EXPECT_EQ(single.best_mtry, 3u);
  const auto r = cross_validate(data_, "A7", preds, {1, 2, 3, 6}, 5, cfg, 1);
  ASSERT_EQ(r.mean_rmse.size(), 4u);
  const auto best = std::min_element(r.mean_rmse.begin(), r.mean_rmse.end()) - r.mean_rmse.begin();
  EXPECT_EQ(r.best_mtry, r.grid[static_cast<std::size_t>(best)]);
  for (std::size_t g = 0; g < r.grid.size(); ++g) {
    ASSERT_EQ(r.fold_rmse[g].size(), 5u);
    const double m = std::accumulate(r.fold_rmse[g].begin(), r.fold_rmse[g].end(), 0.0) / 5.0;
    EXPECT_NEAR(m, r.mean_rmse[g], 1e-12);
  }
  const auto parallel = cross_validate(data_, "A7", preds, {1, 2, 3, 6}, 5, cfg, 1, 4);
  EXPECT_EQ(parallel.mean_rmse, r.mean_rmse);
  EXPECT_THROW(cross_validate(data_, "A7", preds, {7}, 5, cfg, 1), ConfigError);
  EXPECT_THROW(cross_validate(data_, "A7", preds, {}, 5, cfg, 1), ConfigError);
}

TEST_F(CrossValidation, ExternalBehaviouralIntentionGridHolds15) {
  const auto preds = schema_.external_predictors("BI");
  ForestConfig cfg;
  cfg.n_trees = 10;
  const auto r = cross_validate(data_, "BI4", preds, {2, 15, 29}, 3, cfg, 2);
  EXPECT_NE(std::find(r.grid.begin(), r.grid.end(), 15u), r.grid.end());
  EXPECT_NE(to_json(r).find("\"best_mtry\""), std::string::npos);
}

TEST_F(CrossValidation, EvaluateReport) {
  const auto parts = split(data_, 0.8, 3);
  const auto preds = schema_.external_predictors("BI");
  ForestConfig cfg;
  cfg.n_trees = 60;
  cfg.mtry = 9;
  const auto f = fit_forest(parts.train, "BI4", preds, cfg);
  const auto report = evaluate_model(f, parts.train, parts.test, ModelClass::External, threshold_grid(25));
  EXPECT_EQ(report.n_test, static_cast<std::size_t>(parts.test.rows()));
  EXPECT_EQ(report.mtry, 9u);
  const auto& y = report.y_test;
  EXPECT_NEAR(report.nrmse_test * (y.maxCoeff() - y.minCoeff()), report.rmse_test, 1e-12);
  EXPECT_NEAR(report.rmse_test, rmse(y, report.yhat_test), 1e-12);
  EXPECT_EQ(report.accuracy_at.at(200), 1.0);
  const auto b = random_baseline(y, 10, threshold_grid(25), 5);
  const auto csv = accuracy_csv(report.accuracy_at, b);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "threshold,model_accuracy,baseline_mean,baseline_sd");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 10);
}
