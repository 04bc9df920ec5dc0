#pragma once

#include "tamrf/forest.hpp"
#include "tamrf/schema.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace tamrf {

struct PartialDependenceCurve {
  std::string feature;
  std::vector<double> grid;
  /// Average prediction with the feature forced to each grid value.
  std::vector<double> values;
  /// Rows averaged over.
  std::size_t n = 0;
};

/// Observed distinct values of the feature united with the -100..100 step-25
/// grid; thinned to at most `cap` evenly spaced points (ends kept).
std::vector<double> default_pd_grid(const Eigen::VectorXd& observed, std::size_t cap = 101);

/// Partial dependence: for each grid value g, the mean over all rows
/// of `x` of the model's prediction with the feature column set to g.
/// `x` holds the forest's predictor columns.
PartialDependenceCurve partial_dependence(const Forest& f, const Eigen::MatrixXd& x, const std::string& feature,
                                          const std::vector<double>& grid, std::size_t workers = 1);
PartialDependenceCurve partial_dependence(const Forest& f, const Dataset& data, const std::string& feature,
                                          const std::vector<double>& grid, std::size_t workers = 1);

/// Same quantity for one tree of the forest.
PartialDependenceCurve partial_dependence_tree(const Forest& f, std::size_t tree, const Eigen::MatrixXd& x,
                                               const std::string& feature, const std::vector<double>& grid);

/// x,value
std::string to_csv(const PartialDependenceCurve& c);

/// Indented text: split nodes as "CODE ≤ threshold" with the left (true)
/// branch first, leaves as "predict = value (n=N)". The right branch of a
/// split is introduced by an "else" line at the split's indentation.
std::string export_tree_text(const RegressionTree& t, const std::vector<std::string>& predictors);
/// Graphviz DOT rendering of the same tree.
std::string export_tree_dot(const RegressionTree& t, const std::vector<std::string>& predictors);

}  // namespace tamrf
