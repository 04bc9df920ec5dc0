#include "tamrf/explain.hpp"

#include "tamrf/error.hpp"
#include "tamrf/io.hpp"
#include "tamrf/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

namespace tamrf {

namespace {

Eigen::Index feature_index(const Forest& f, const std::string& feature) {
  const auto& p = f.predictors();
  const auto it = std::find(p.begin(), p.end(), feature);
  if (it == p.end()) throw ConfigError(fmt::format("partial dependence: {} is not a predictor of the model", feature));
  return static_cast<Eigen::Index>(it - p.begin());
}

void check_grid(const std::vector<double>& grid) {
  if (grid.empty()) throw ConfigError("partial dependence: empty grid");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ConfigError("partial dependence: grid must be strictly increasing");
}

void check_matrix(const Forest& f, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.cols()) != f.predictors().size())
    throw DataError("partial dependence: matrix columns do not match the model's predictors");
  if (x.rows() == 0) throw DataError("partial dependence: no rows");
  if (x.hasNaN()) throw DataError("partial dependence: data has missing model values");
}

}  // namespace

std::vector<double> default_pd_grid(const Eigen::VectorXd& observed, std::size_t cap) {
  std::set<double> pts;
  for (Eigen::Index i = 0; i < observed.size(); ++i)
    if (!std::isnan(observed(i))) pts.insert(observed(i));
  for (int i = 0; i <= 8; ++i) pts.insert(-100.0 + 25.0 * i);
  std::vector<double> all(pts.begin(), pts.end());
  if (cap < 2 || all.size() <= cap) return all;
  std::vector<double> out;
  for (std::size_t k = 0; k < cap; ++k) {
    const auto idx = static_cast<std::size_t>(std::llround(static_cast<double>(k) * static_cast<double>(all.size() - 1) /
                                                           static_cast<double>(cap - 1)));
    if (out.empty() || all[idx] > out.back()) out.push_back(all[idx]);
  }
  return out;
}

PartialDependenceCurve partial_dependence(const Forest& f, const Eigen::MatrixXd& x, const std::string& feature,
                                          const std::vector<double>& grid, std::size_t workers) {
  const auto j = feature_index(f, feature);
  check_grid(grid);
  check_matrix(f, x);
  PartialDependenceCurve c{feature, grid, std::vector<double>(grid.size()), static_cast<std::size_t>(x.rows())};
  parallel_for(grid.size(), workers, [&](std::size_t g) {
    Eigen::MatrixXd forced = x;
    forced.col(j).setConstant(grid[g]);
    c.values[g] = f.predict(forced).mean();
  });
  return c;
}

PartialDependenceCurve partial_dependence(const Forest& f, const Dataset& data, const std::string& feature,
                                          const std::vector<double>& grid, std::size_t workers) {
  return partial_dependence(f, data.matrix(f.predictors()), feature, grid, workers);
}

PartialDependenceCurve partial_dependence_tree(const Forest& f, std::size_t tree, const Eigen::MatrixXd& x,
                                               const std::string& feature, const std::vector<double>& grid) {
  const auto j = feature_index(f, feature);
  check_grid(grid);
  check_matrix(f, x);
  const auto& t = f.trees().at(tree);
  PartialDependenceCurve c{feature, grid, {}, static_cast<std::size_t>(x.rows())};
  Eigen::MatrixXd forced = x;
  for (double g : grid) {
    forced.col(j).setConstant(g);
    double s = 0.0;
    for (Eigen::Index i = 0; i < forced.rows(); ++i) s += t.predict(forced.row(i));
    c.values.push_back(s / static_cast<double>(forced.rows()));
  }
  return c;
}

std::string to_csv(const PartialDependenceCurve& c) {
  std::string out = fmt::format("{},value\n", io::csv_escape(c.feature));
  for (std::size_t i = 0; i < c.grid.size(); ++i)
    out += fmt::format("{},{}\n", io::format_number(c.grid[i]), io::format_number(c.values[i]));
  return out;
}

namespace {

void text_node(const RegressionTree& t, const std::vector<std::string>& predictors, int id, int depth,
               std::string& out) {
  const auto& n = t.nodes()[static_cast<std::size_t>(id)];
  const std::string indent(static_cast<std::size_t>(2 * depth), ' ');
  if (n.is_leaf()) {
    out += fmt::format("{}predict = {} (n={})\n", indent, io::format_number(n.value), n.n_samples);
    return;
  }
  out += fmt::format("{}{} ≤ {}\n", indent, predictors.at(static_cast<std::size_t>(n.feature)),
                     io::format_number(n.threshold));
  text_node(t, predictors, n.left, depth + 1, out);
  out += fmt::format("{}else\n", indent);
  text_node(t, predictors, n.right, depth + 1, out);
}

}  // namespace

std::string export_tree_text(const RegressionTree& t, const std::vector<std::string>& predictors) {
  std::string out;
  text_node(t, predictors, 0, 0, out);
  return out;
}

std::string export_tree_dot(const RegressionTree& t, const std::vector<std::string>& predictors) {
  std::string out = "digraph tree {\n  node [fontname=\"Helvetica\"];\n";
  for (std::size_t i = 0; i < t.nodes().size(); ++i) {
    const auto& n = t.nodes()[i];
    if (n.is_leaf()) {
      out += fmt::format("  n{} [shape=box, style=filled, fillcolor=\"#c7e9c0\", label=\"{}\\nn={}\"];\n", i,
                         io::format_number(n.value), n.n_samples);
    } else {
      out += fmt::format("  n{} [shape=ellipse, label=\"{} <= {}\"];\n", i,
                         predictors.at(static_cast<std::size_t>(n.feature)), io::format_number(n.threshold));
      out += fmt::format("  n{} -> n{} [label=\"yes\"];\n  n{} -> n{} [label=\"no\"];\n", i, n.left, i, n.right);
    }
  }
  out += "}\n";
  return out;
}

}  // namespace tamrf
