#pragma once

#include "tamrf/forest.hpp"
#include "tamrf/metrics.hpp"
#include "tamrf/schema.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace tamrf {

enum class ModelClass { External, Internal };

const char* to_string(ModelClass c) noexcept;
ModelClass model_class_from_string(std::string_view s);

/// Threshold -> fraction of predictions within +-threshold.
using AccuracyCurve = std::map<double, double>;

/// Pointwise threshold_accuracy; thresholds must lie in [0, 200].
template <typename A, typename B>
AccuracyCurve accuracy_curve(const Eigen::DenseBase<A>& y, const Eigen::DenseBase<B>& yhat,
                             const std::vector<double>& thresholds) {
  AccuracyCurve curve;
  for (double t : thresholds) {
    if (!(t >= 0.0 && t <= 200.0)) throw ConfigError("accuracy_curve: thresholds must lie in [0, 200]");
    curve[t] = threshold_accuracy(y, yhat, t);
  }
  return curve;
}

/// {0, step, 2 step, ..., 200}.
std::vector<double> threshold_grid(double step = 5.0);

struct EvaluationReport {
  std::string target;
  ModelClass model_class = ModelClass::External;
  std::size_t mtry = 0;
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  /// Train metrics use out-of-bag predictions.
  double rmse_train = 0.0;
  double rmse_test = 0.0;
  double nrmse_train = 0.0;
  double nrmse_test = 0.0;
  AccuracyCurve accuracy_train_at;
  /// Held-out accuracy curve.
  AccuracyCurve accuracy_at;
  Eigen::VectorXd y_test;
  Eigen::VectorXd yhat_test;
};

/// Scores a forest on its training set (out-of-bag) and a held-out set.
EvaluationReport evaluate_model(const Forest& f, const Dataset& train, const Dataset& test, ModelClass model_class,
                                const std::vector<double>& thresholds);

struct BaselineCurve {
  std::vector<double> thresholds;
  std::vector<double> mean_accuracy;
  /// Sample standard deviation across replicates (0 for one replicate).
  std::vector<double> stddev;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
};

/// Accuracy of uniform random guesses on [-100, 100] against y, replicated
/// n_samples times; replicate r uses the RNG stream (seed, r).
BaselineCurve random_baseline(const Eigen::VectorXd& y, std::size_t n_samples, const std::vector<double>& thresholds,
                              std::uint64_t seed, std::size_t workers = 1);

struct CvReport {
  std::size_t folds = 0;
  std::vector<std::size_t> grid;
  /// Mean held-out RMSE per grid entry (aligned with grid).
  std::vector<double> mean_rmse;
  /// fold_rmse[g][k]: RMSE of grid entry g on fold k.
  std::vector<std::vector<double>> fold_rmse;
  std::size_t best_mtry = 0;
};

/// {2, floor(p/3), floor(p/2), p} clipped to [1, p], deduplicated, ascending.
std::vector<std::size_t> default_mtry_grid(std::size_t n_predictors);

/// Fold ids for n rows: shuffle once with `seed`, then k contiguous blocks
/// whose sizes differ by at most one.
std::vector<std::size_t> assign_folds(std::size_t n, std::size_t k, std::uint64_t seed);

/// k-fold CV of the forest over an mtry grid. Every grid entry sees the same
/// folds and the same per-fold forest seed. Ties go to the smallest mtry.
CvReport cross_validate(const Dataset& train, const std::string& target, const std::vector<std::string>& predictors,
                        const std::vector<std::size_t>& grid, std::size_t k, const ForestConfig& cfg,
                        std::uint64_t seed, std::size_t workers = 1);

std::string to_json(const EvaluationReport& r);
std::string to_json(const BaselineCurve& b);
std::string to_json(const CvReport& r);

/// threshold,model_accuracy,baseline_mean,baseline_sd
std::string accuracy_csv(const AccuracyCurve& model, const BaselineCurve& baseline);

}  // namespace tamrf
