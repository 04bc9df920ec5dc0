#include "tamrf/forest.hpp"

#include "tamrf/error.hpp"
#include "tamrf/metrics.hpp"
#include "tamrf/parallel.hpp"
#include "tamrf/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace tamrf {

using Eigen::Index;

std::size_t ForestConfig::resolved_mtry(std::size_t n_predictors) const {
  if (n_predictors == 0) throw ConfigError("forest: no predictors");
  const std::size_t m = mtry == 0 ? std::max<std::size_t>(1, n_predictors / 3) : mtry;
  if (m > n_predictors)
    throw ConfigError(fmt::format("forest: mtry {} exceeds the {} available predictors", m, n_predictors));
  return m;
}

RegressionTree::RegressionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ModelError("tree: no nodes");
  const auto n = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_) {
    if (node.is_leaf()) continue;
    if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n)
      throw ModelError("tree: internal node with invalid child reference");
  }
}

double RegressionTree::total_impurity_decrease() const noexcept {
  double s = 0.0;
  for (const auto& n : nodes_) s += n.impurity_decrease;
  return s;
}

std::size_t RegressionTree::leaf_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.is_leaf(); }));
}

std::optional<SplitCandidate> best_split(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                                         std::span<const Index> rows, std::span<const Index> candidate_features,
                                         std::size_t min_child) {
  const std::size_t n = rows.size();
  min_child = std::max<std::size_t>(1, min_child);
  if (n < 2 * min_child) return std::nullopt;

  double mean = 0.0;
  for (auto r : rows) mean += y(r);
  mean /= static_cast<double>(n);
  double sse = 0.0;
  for (auto r : rows) sse += (y(r) - mean) * (y(r) - mean);
  const double tol = 1e-9 * std::max(1.0, sse);

  std::vector<Index> features(candidate_features.begin(), candidate_features.end());
  std::sort(features.begin(), features.end());

  // (feature value, centered target) pairs, reused across features.
  std::vector<std::pair<double, double>> pairs(n);
  std::optional<SplitCandidate> best;
  double best_decrease = tol;
  for (const auto f : features) {
    for (std::size_t i = 0; i < n; ++i) pairs[i] = {x(rows[i], f), y(rows[i]) - mean};
    std::sort(pairs.begin(), pairs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    if (pairs.front().first == pairs.back().first) continue;
    double left_sum = 0.0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      left_sum += pairs[i].second;
      if (pairs[i].first == pairs[i + 1].first) continue;
      const std::size_t nl = i + 1, nr = n - nl;
      if (nl < min_child || nr < min_child) continue;
      // Centered targets sum to zero, so the right sum is -left_sum and the
      // parent term vanishes.
      const double decrease = left_sum * left_sum / static_cast<double>(nl) +
                              left_sum * left_sum / static_cast<double>(nr);
      if (decrease > best_decrease + (best ? tol : 0.0)) {
        best_decrease = decrease;
        best = SplitCandidate{f, 0.5 * (pairs[i].first + pairs[i + 1].first), decrease};
      }
    }
  }
  return best;
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::size_t mtry, const ForestConfig& cfg, Rng& rng)
      : x_(x), y_(y), mtry_(mtry), cfg_(cfg), rng_(rng), features_(static_cast<std::size_t>(x.cols())) {
    std::iota(features_.begin(), features_.end(), Index{0});
  }

  RegressionTree build(std::vector<Index> rows) {
    grow(std::move(rows), 0);
    return RegressionTree(std::move(nodes_));
  }

 private:
  int grow(std::vector<Index> rows, std::size_t depth) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    double sum = 0.0;
    for (auto r : rows) sum += y_(r);
    nodes_.back().n_samples = rows.size();
    nodes_.back().value = sum / static_cast<double>(rows.size());

    const bool depth_ok = !cfg_.max_depth || depth < *cfg_.max_depth;
    if (!depth_ok || rows.size() < 2 * cfg_.min_node_size) return id;

    // Partial Fisher-Yates: the first mtry entries become the candidate set.
    for (std::size_t i = 0; i < mtry_; ++i) {
      const auto j = i + uniform_index(rng_, features_.size() - i);
      std::swap(features_[i], features_[j]);
    }
    const std::span<const Index> candidates(features_.data(), mtry_);
    const auto split = best_split(x_, y_, rows, candidates, cfg_.min_node_size);
    if (!split) return id;

    std::vector<Index> left, right;
    for (auto r : rows) (x_(r, split->feature) <= split->threshold ? left : right).push_back(r);
    rows.clear();
    rows.shrink_to_fit();

    nodes_[static_cast<std::size_t>(id)].feature = static_cast<int>(split->feature);
    nodes_[static_cast<std::size_t>(id)].threshold = split->threshold;
    nodes_[static_cast<std::size_t>(id)].impurity_decrease = split->sse_decrease;
    const int l = grow(std::move(left), depth + 1);
    const int r = grow(std::move(right), depth + 1);
    nodes_[static_cast<std::size_t>(id)].left = l;
    nodes_[static_cast<std::size_t>(id)].right = r;
    return id;
  }

  const Eigen::MatrixXd& x_;
  const Eigen::VectorXd& y_;
  std::size_t mtry_;
  const ForestConfig& cfg_;
  Rng& rng_;
  std::vector<Index> features_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

Forest::Forest(std::string target, std::vector<std::string> predictors, ForestConfig config,
               std::vector<RegressionTree> trees, std::vector<std::vector<Index>> bootstrap)
    : target_(std::move(target)),
      predictors_(std::move(predictors)),
      config_(config),
      trees_(std::move(trees)),
      bootstrap_(std::move(bootstrap)) {
  if (trees_.empty()) throw ModelError("forest: no trees");
  if (!bootstrap_.empty() && bootstrap_.size() != trees_.size())
    throw ModelError("forest: bootstrap list count does not match tree count");
  for (const auto& t : trees_)
    for (const auto& n : t.nodes())
      if (!n.is_leaf() && static_cast<std::size_t>(n.feature) >= predictors_.size())
        throw ModelError("forest: split on an unknown feature index");
}

Eigen::VectorXd Forest::predict(const Eigen::MatrixXd& x) const {
  if (static_cast<std::size_t>(x.cols()) != predictors_.size())
    throw DataError("predict: column count does not match the forest's predictors");
  Eigen::VectorXd out(x.rows());
  for (Index i = 0; i < x.rows(); ++i) out(i) = predict_row(x.row(i));
  return out;
}

Eigen::VectorXd Forest::oob_predict(const Eigen::MatrixXd& train_x) const {
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(train_x.rows());
  Eigen::VectorXi count = Eigen::VectorXi::Zero(train_x.rows());
  std::vector<char> in_bag(static_cast<std::size_t>(train_x.rows()));
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    std::fill(in_bag.begin(), in_bag.end(), 0);
    for (auto r : bootstrap_.at(t)) {
      if (r >= train_x.rows()) throw DataError("oob_predict: matrix is not the training matrix");
      in_bag[static_cast<std::size_t>(r)] = 1;
    }
    for (Index i = 0; i < train_x.rows(); ++i) {
      if (in_bag[static_cast<std::size_t>(i)]) continue;
      sum(i) += trees_[t].predict(train_x.row(i));
      ++count(i);
    }
  }
  Eigen::VectorXd out(train_x.rows());
  for (Index i = 0; i < train_x.rows(); ++i)
    out(i) = count(i) ? sum(i) / count(i) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

Forest fit_forest(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, std::vector<std::string> predictors,
                  std::string target, const ForestConfig& cfg, std::size_t workers) {
  if (predictors.empty()) throw ConfigError("fit_forest: empty predictor list");
  if (static_cast<std::size_t>(x.cols()) != predictors.size())
    throw ConfigError("fit_forest: predictor names do not match matrix columns");
  if (x.rows() != y.size()) throw DataError("fit_forest: row count mismatch between x and y");
  if (x.rows() < 1) throw DataError("fit_forest: no training rows");
  if (cfg.n_trees < 1) throw ConfigError("fit_forest: n_trees must be >= 1");
  if (cfg.min_node_size < 1) throw ConfigError("fit_forest: min_node_size must be >= 1");
  if (x.hasNaN() || y.hasNaN()) throw DataError("fit_forest: missing values among target or predictors");
  const std::size_t mtry = cfg.resolved_mtry(predictors.size());

  const auto n = static_cast<std::uint64_t>(x.rows());
  std::vector<RegressionTree> trees(cfg.n_trees);
  std::vector<std::vector<Index>> bootstrap(cfg.n_trees);
  parallel_for(cfg.n_trees, workers, [&](std::size_t t) {
    auto rng = make_rng(cfg.seed, {0xf0e57, t});
    std::vector<Index> rows(n);
    for (auto& r : rows) r = static_cast<Index>(uniform_index(rng, n));
    bootstrap[t] = rows;
    TreeBuilder builder(x, y, mtry, cfg, rng);
    trees[t] = builder.build(std::move(rows));
  });
  return Forest(std::move(target), std::move(predictors), cfg, std::move(trees), std::move(bootstrap));
}

Forest fit_forest(const Dataset& train, const std::string& target, const std::vector<std::string>& predictors,
                  const ForestConfig& cfg, std::size_t workers) {
  if (predictors.empty()) throw ConfigError("fit_forest: empty predictor list");
  if (std::find(predictors.begin(), predictors.end(), target) != predictors.end())
    throw ConfigError(fmt::format("fit_forest: target {} is also a predictor", target));
  const Eigen::MatrixXd x = train.matrix(predictors);
  const Eigen::VectorXd y = train.column(target);
  if (x.hasNaN() || y.hasNaN())
    throw DataError(fmt::format("fit_forest({}): training data has missing values; apply complete_cases first", target));
  return fit_forest(x, y, predictors, target, cfg, workers);
}

double predict(const Forest& f, std::span<const double> row) {
  if (row.size() != f.predictors().size()) throw DataError("predict: row length does not match predictors");
  for (std::size_t j = 0; j < row.size(); ++j)
    if (std::isnan(row[j])) throw DataError(fmt::format("predict: missing value for predictor {}", f.predictors()[j]));
  const Eigen::Map<const Eigen::RowVectorXd> r(row.data(), static_cast<Index>(row.size()));
  return f.predict_row(r);
}

Eigen::VectorXd predict(const Forest& f, const Dataset& data) {
  const Eigen::MatrixXd x = data.matrix(f.predictors());
  if (x.hasNaN()) throw DataError("predict: data has missing predictor values");
  return f.predict(x);
}

std::map<std::string, double> impurity_importance(const Forest& f) {
  std::vector<double> total(f.predictors().size(), 0.0);
  for (const auto& t : f.trees())
    for (const auto& n : t.nodes())
      if (!n.is_leaf()) total[static_cast<std::size_t>(n.feature)] += n.impurity_decrease;
  std::map<std::string, double> out;
  for (std::size_t j = 0; j < total.size(); ++j)
    out[f.predictors()[j]] = total[j] / static_cast<double>(f.trees().size());
  return out;
}

std::map<std::string, double> permutation_importance(const Forest& f, const Dataset& data, std::uint64_t seed,
                                                     std::size_t n_repeats, std::size_t workers) {
  if (n_repeats < 1) throw ConfigError("permutation_importance: n_repeats must be >= 1");
  const Eigen::MatrixXd x = data.matrix(f.predictors());
  const Eigen::VectorXd y = data.column(f.target());
  if (x.hasNaN() || y.hasNaN()) throw DataError("permutation_importance: data has missing model values");
  const double base = rmse(y, f.predict(x));

  const auto p = f.predictors().size();
  std::vector<double> increase(p, 0.0);
  parallel_for(p, workers, [&](std::size_t j) {
    Eigen::MatrixXd shuffled = x;
    std::vector<Index> order(static_cast<std::size_t>(x.rows()));
    double acc = 0.0;
    for (std::size_t rep = 0; rep < n_repeats; ++rep) {
      std::iota(order.begin(), order.end(), Index{0});
      auto rng = make_rng(seed, {0x9e3, j, rep});
      shuffle(order.begin(), order.end(), rng);
      for (Index i = 0; i < x.rows(); ++i) shuffled(i, static_cast<Index>(j)) = x(order[static_cast<std::size_t>(i)], static_cast<Index>(j));
      acc += rmse(y, f.predict(shuffled)) - base;
    }
    increase[j] = acc / static_cast<double>(n_repeats);
  });
  std::map<std::string, double> out;
  for (std::size_t j = 0; j < p; ++j) out[f.predictors()[j]] = increase[j];
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

std::string to_json(const Forest& f) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["format"] = "tamrf-forest/1";
  j["target"] = f.target();
  j["predictors"] = f.predictors();
  const auto& c = f.config();
  j["config"] = {{"n_trees", c.n_trees},
                 {"mtry", c.mtry},
                 {"min_node_size", c.min_node_size},
                 {"max_depth", c.max_depth ? ordered_json(*c.max_depth) : ordered_json(nullptr)},
                 {"seed", c.seed}};
  auto& trees = j["trees"] = ordered_json::array();
  for (std::size_t t = 0; t < f.trees().size(); ++t) {
    ordered_json tree;
    tree["bootstrap"] = t < f.bootstrap().size() ? ordered_json(f.bootstrap()[t]) : ordered_json::array();
    auto& nodes = tree["nodes"] = ordered_json::array();
    for (const auto& n : f.trees()[t].nodes()) {
      ordered_json node;
      if (!n.is_leaf()) {
        node["feature"] = f.predictors()[static_cast<std::size_t>(n.feature)];
        node["threshold"] = n.threshold;
        node["left"] = n.left;
        node["right"] = n.right;
        node["decrease"] = n.impurity_decrease;
      }
      node["value"] = n.value;
      node["n"] = n.n_samples;
      nodes.push_back(std::move(node));
    }
    trees.push_back(std::move(tree));
  }
  return j.dump() + "\n";
}

Forest forest_from_json(std::string_view text) {
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.at("format") != "tamrf-forest/1") throw ModelError("forest json: unsupported format");
    auto predictors = j.at("predictors").get<std::vector<std::string>>();
    ForestConfig cfg;
    const auto& c = j.at("config");
    cfg.n_trees = c.at("n_trees").get<std::size_t>();
    cfg.mtry = c.at("mtry").get<std::size_t>();
    cfg.min_node_size = c.at("min_node_size").get<std::size_t>();
    if (!c.at("max_depth").is_null()) cfg.max_depth = c.at("max_depth").get<std::size_t>();
    cfg.seed = c.at("seed").get<std::uint64_t>();

    std::vector<RegressionTree> trees;
    std::vector<std::vector<Index>> bootstrap;
    for (const auto& t : j.at("trees")) {
      bootstrap.push_back(t.at("bootstrap").get<std::vector<Index>>());
      std::vector<TreeNode> nodes;
      for (const auto& nj : t.at("nodes")) {
        TreeNode n;
        n.value = nj.at("value").get<double>();
        n.n_samples = nj.at("n").get<std::size_t>();
        if (nj.contains("feature")) {
          const auto code = nj.at("feature").get<std::string>();
          const auto it = std::find(predictors.begin(), predictors.end(), code);
          if (it == predictors.end()) throw ModelError(fmt::format("forest json: unknown feature {}", code));
          n.feature = static_cast<int>(it - predictors.begin());
          n.threshold = nj.at("threshold").get<double>();
          n.left = nj.at("left").get<int>();
          n.right = nj.at("right").get<int>();
          n.impurity_decrease = nj.at("decrease").get<double>();
        }
        nodes.push_back(n);
      }
      trees.emplace_back(std::move(nodes));
    }
    if (std::all_of(bootstrap.begin(), bootstrap.end(), [](const auto& b) { return b.empty(); })) bootstrap.clear();
    return Forest(j.at("target").get<std::string>(), std::move(predictors), cfg, std::move(trees),
                  std::move(bootstrap));
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(fmt::format("forest json: {}", e.what()));
  }
}

}  // namespace tamrf
