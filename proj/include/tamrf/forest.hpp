#pragma once

#include "tamrf/schema.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tamrf {

struct ForestConfig {
  std::size_t n_trees = 500;
  /// Features tried per split; 0 selects max(1, floor(p / 3)).
  std::size_t mtry = 0;
  /// Minimum in-bag samples in each child of a split.
  std::size_t min_node_size = 5;
  std::optional<std::size_t> max_depth;
  std::uint64_t seed = 0;

  /// mtry after resolving the default against p predictors; throws
  /// ConfigError when out of [1, p].
  std::size_t resolved_mtry(std::size_t n_predictors) const;
};

struct TreeNode {
  /// Split feature (column index into the forest's predictors), -1 for leaves.
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  /// Mean of in-bag targets reaching this node.
  double value = 0.0;
  std::size_t n_samples = 0;
  /// SSE decrease achieved by this node's split (0 for leaves).
  double impurity_decrease = 0.0;

  bool is_leaf() const noexcept { return feature < 0; }
};

/// CART regression tree in preorder (root at index 0, left subtree first).
class RegressionTree {
 public:
  RegressionTree() = default;
  explicit RegressionTree(std::vector<TreeNode> nodes);

  const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }

  /// Index of the leaf a row lands in; goes left iff value <= threshold.
  template <typename Row>
  int leaf_index(const Eigen::DenseBase<Row>& row) const {
    int i = 0;
    while (!nodes_[static_cast<std::size_t>(i)].is_leaf()) {
      const auto& n = nodes_[static_cast<std::size_t>(i)];
      i = row(n.feature) <= n.threshold ? n.left : n.right;
    }
    return i;
  }

  template <typename Row>
  double predict(const Eigen::DenseBase<Row>& row) const {
    return nodes_[static_cast<std::size_t>(leaf_index(row))].value;
  }

  double total_impurity_decrease() const noexcept;
  std::size_t leaf_count() const noexcept;

 private:
  std::vector<TreeNode> nodes_;
};

struct SplitCandidate {
  Eigen::Index feature = 0;
  double threshold = 0.0;
  double sse_decrease = 0.0;
};

/// Best SSE-reducing split of `rows` (indices into x/y, repeats allowed) over
/// `candidate_features`. Thresholds are midpoints between consecutive distinct
/// values; both children must keep at least `min_child` rows. Near-ties
/// (relative 1e-9) go to the lowest feature index, then the lowest threshold.
/// Returns nullopt when no admissible split reduces SSE.
std::optional<SplitCandidate> best_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                         std::span<const Eigen::Index> rows,
                                         std::span<const Eigen::Index> candidate_features,
                                         std::size_t min_child = 1);

/// Bagged ensemble of regression trees over named predictor columns.
class Forest {
 public:
  Forest() = default;
  Forest(std::string target, std::vector<std::string> predictors, ForestConfig config,
         std::vector<RegressionTree> trees, std::vector<std::vector<Eigen::Index>> bootstrap);

  const std::string& target() const noexcept { return target_; }
  const std::vector<std::string>& predictors() const noexcept { return predictors_; }
  const ForestConfig& config() const noexcept { return config_; }
  const std::vector<RegressionTree>& trees() const noexcept { return trees_; }
  /// In-bag row indices (with repeats) per tree.
  const std::vector<std::vector<Eigen::Index>>& bootstrap() const noexcept { return bootstrap_; }

  template <typename Row>
  double predict_row(const Eigen::DenseBase<Row>& row) const {
    double sum = 0.0;
    for (const auto& t : trees_) sum += t.predict(row);
    return sum / static_cast<double>(trees_.size());
  }

  /// Predictions for each row of x (columns ordered as predictors()).
  Eigen::VectorXd predict(const Eigen::MatrixXd& x) const;
  /// Out-of-bag predictions for the training matrix; NaN for rows that were
  /// in-bag for every tree.
  Eigen::VectorXd oob_predict(const Eigen::MatrixXd& train_x) const;

 private:
  std::string target_;
  std::vector<std::string> predictors_;
  ForestConfig config_;
  std::vector<RegressionTree> trees_;
  std::vector<std::vector<Eigen::Index>> bootstrap_;
};

/// Fits n_trees trees on bootstrap samples of size n. Tree t draws from its own
/// RNG stream derived from (seed, t), so the result does not depend on
/// `workers`.
Forest fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<std::string> predictors,
                  std::string target, const ForestConfig& cfg, std::size_t workers = 1);

/// Dataset front end; rejects missing values among target and predictors.
Forest fit_forest(const Dataset& train, const std::string& target, const std::vector<std::string>& predictors,
                  const ForestConfig& cfg, std::size_t workers = 1);

/// Single-row prediction; `row` is ordered as f.predictors(). Throws
/// DataError on a missing (NaN) value.
double predict(const Forest& f, std::span<const double> row);
/// Predictions for the forest's predictor columns of `data`.
Eigen::VectorXd predict(const Forest& f, const Dataset& data);

/// Per-feature SSE decrease summed over splits, averaged over trees.
std::map<std::string, double> impurity_importance(const Forest& f);

/// Mean RMSE increase after permuting each feature column of `data`.
std::map<std::string, double> permutation_importance(const Forest& f, const Dataset& data, std::uint64_t seed,
                                                     std::size_t n_repeats, std::size_t workers = 1);

/// Canonical JSON (stable key order, round-trip doubles).
std::string to_json(const Forest& f);
Forest forest_from_json(std::string_view text);

}  // namespace tamrf
