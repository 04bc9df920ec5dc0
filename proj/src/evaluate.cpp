#include "tamrf/evaluate.hpp"

#include "tamrf/error.hpp"
#include "tamrf/io.hpp"
#include "tamrf/parallel.hpp"
#include "tamrf/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

namespace tamrf {

using nlohmann::ordered_json;

const char* to_string(ModelClass c) noexcept { return c == ModelClass::External ? "External" : "Internal"; }

ModelClass model_class_from_string(std::string_view s) {
  if (s == "External" || s == "external") return ModelClass::External;
  if (s == "Internal" || s == "internal") return ModelClass::Internal;
  throw ConfigError(fmt::format("unknown model class '{}'", s));
}

std::vector<double> threshold_grid(double step) {
  if (!(step > 0.0)) throw ConfigError("threshold grid step must be positive");
  std::vector<double> out;
  for (int i = 0;; ++i) {
    const double t = step * i;
    if (t > 200.0 + 1e-9) break;
    out.push_back(t);
  }
  if (out.back() < 200.0) out.push_back(200.0);
  return out;
}

EvaluationReport evaluate_model(const Forest& f, const Dataset& train, const Dataset& test, ModelClass model_class,
                                const std::vector<double>& thresholds) {
  EvaluationReport r;
  r.target = f.target();
  r.model_class = model_class;
  r.mtry = f.config().resolved_mtry(f.predictors().size());

  const Eigen::MatrixXd xtr = train.matrix(f.predictors());
  const Eigen::VectorXd ytr = train.column(f.target());
  if (xtr.hasNaN() || ytr.hasNaN()) throw DataError("evaluate: training data has missing model values");
  if (!f.bootstrap().empty() && static_cast<Eigen::Index>(f.bootstrap().front().size()) != xtr.rows())
    throw DataError("evaluate: training set size differs from the one the forest was fitted on");
  const Eigen::VectorXd oob = f.oob_predict(xtr);
  std::vector<Eigen::Index> have;
  for (Eigen::Index i = 0; i < oob.size(); ++i)
    if (!std::isnan(oob(i))) have.push_back(i);
  if (have.empty()) throw ModelError("evaluate: no out-of-bag predictions (too few trees)");
  const Eigen::VectorXd ytr_o = ytr(have);
  const Eigen::VectorXd oob_o = oob(have);

  r.y_test = test.column(f.target());
  const Eigen::MatrixXd xte = test.matrix(f.predictors());
  if (xte.hasNaN() || r.y_test.hasNaN()) throw DataError("evaluate: test data has missing model values");
  r.yhat_test = f.predict(xte);

  r.n_train = static_cast<std::size_t>(ytr.size());
  r.n_test = static_cast<std::size_t>(r.y_test.size());
  r.rmse_train = rmse(ytr_o, oob_o);
  r.nrmse_train = nrmse(ytr_o, oob_o);
  r.rmse_test = rmse(r.y_test, r.yhat_test);
  r.nrmse_test = nrmse(r.y_test, r.yhat_test);
  r.accuracy_train_at = accuracy_curve(ytr_o, oob_o, thresholds);
  r.accuracy_at = accuracy_curve(r.y_test, r.yhat_test, thresholds);
  return r;
}

BaselineCurve random_baseline(const Eigen::VectorXd& y, std::size_t n_samples, const std::vector<double>& thresholds,
                              std::uint64_t seed, std::size_t workers) {
  if (n_samples < 1) throw ConfigError("random_baseline: n_samples must be >= 1");
  if (y.size() == 0) throw DataError("random_baseline: empty target vector");
  std::vector<std::vector<double>> acc(n_samples);
  parallel_for(n_samples, workers, [&](std::size_t s) {
    auto rng = make_rng(seed, {0xba5e, s});
    Eigen::VectorXd guess(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) guess(i) = -100.0 + 200.0 * uniform_unit(rng);
    const auto curve = accuracy_curve(y, guess, thresholds);
    acc[s].reserve(thresholds.size());
    for (double t : thresholds) acc[s].push_back(curve.at(t));
  });

  BaselineCurve b;
  b.thresholds = thresholds;
  b.n_samples = n_samples;
  b.seed = seed;
  for (std::size_t j = 0; j < thresholds.size(); ++j) {
    double mean = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) mean += acc[s][j];
    mean /= static_cast<double>(n_samples);
    double ss = 0.0;
    for (std::size_t s = 0; s < n_samples; ++s) ss += (acc[s][j] - mean) * (acc[s][j] - mean);
    b.mean_accuracy.push_back(mean);
    b.stddev.push_back(n_samples > 1 ? std::sqrt(ss / static_cast<double>(n_samples - 1)) : 0.0);
  }
  return b;
}

std::vector<std::size_t> default_mtry_grid(std::size_t p) {
  if (p == 0) throw ConfigError("default_mtry_grid: no predictors");
  std::vector<std::size_t> g{2, p / 3, p / 2, p};
  for (auto& m : g) m = std::clamp<std::size_t>(m, 1, p);
  std::sort(g.begin(), g.end());
  g.erase(std::unique(g.begin(), g.end()), g.end());
  return g;
}

std::vector<std::size_t> assign_folds(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("cross validation needs k >= 2");
  if (n < k) throw DataError(fmt::format("cross validation: {} rows cannot fill {} folds", n, k));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(seed, {0xf01d});
  shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold(n);
  for (std::size_t f = 0; f < k; ++f)
    for (std::size_t i = f * n / k; i < (f + 1) * n / k; ++i) fold[order[i]] = f;
  return fold;
}

CvReport cross_validate(const Dataset& train, const std::string& target, const std::vector<std::string>& predictors,
                        const std::vector<std::size_t>& grid, std::size_t k, const ForestConfig& cfg,
                        std::uint64_t seed, std::size_t workers) {
  if (grid.empty()) throw ConfigError("cross_validate: empty mtry grid");
  for (auto m : grid)
    if (m < 1 || m > predictors.size())
      throw ConfigError(fmt::format("cross_validate: mtry {} outside [1, {}]", m, predictors.size()));
  const Eigen::MatrixXd x = train.matrix(predictors);
  const Eigen::VectorXd y = train.column(target);
  if (x.hasNaN() || y.hasNaN()) throw DataError("cross_validate: training data has missing model values");
  const auto n = static_cast<std::size_t>(x.rows());
  const auto fold = assign_folds(n, k, seed);

  std::vector<std::vector<Eigen::Index>> in_rows(k), out_rows(k);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t f = 0; f < k; ++f) (fold[i] == f ? out_rows : in_rows)[f].push_back(static_cast<Eigen::Index>(i));

  CvReport report;
  report.folds = k;
  report.grid = grid;
  report.fold_rmse.assign(grid.size(), std::vector<double>(k));
  // Trees inside each fit run sequentially; the (grid, fold) jobs are the
  // parallel unit.
  parallel_for(grid.size() * k, workers, [&](std::size_t job) {
    const std::size_t g = job / k, f = job % k;
    ForestConfig c = cfg;
    c.mtry = grid[g];
    c.seed = derive_seed(cfg.seed, {0xc5, f});
    const Eigen::MatrixXd xin = x(in_rows[f], Eigen::all);
    const Eigen::VectorXd yin = y(in_rows[f]);
    const auto forest = fit_forest(xin, yin, predictors, target, c, 1);
    const Eigen::MatrixXd xout = x(out_rows[f], Eigen::all);
    const Eigen::VectorXd yout = y(out_rows[f]);
    report.fold_rmse[g][f] = rmse(yout, forest.predict(xout));
  });
  for (std::size_t g = 0; g < grid.size(); ++g)
    report.mean_rmse.push_back(std::accumulate(report.fold_rmse[g].begin(), report.fold_rmse[g].end(), 0.0) /
                               static_cast<double>(k));
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (report.mean_rmse[g] < report.mean_rmse[best] ||
        (report.mean_rmse[g] == report.mean_rmse[best] && grid[g] < grid[best]))
      best = g;
  report.best_mtry = grid[best];
  return report;
}

namespace {
ordered_json curve_json(const AccuracyCurve& c) {
  auto arr = ordered_json::array();
  for (const auto& [t, a] : c) arr.push_back({{"threshold", t}, {"accuracy", a}});
  return arr;
}
}  // namespace

std::string to_json(const EvaluationReport& r) {
  ordered_json j;
  j["target"] = r.target;
  j["class"] = to_string(r.model_class);
  j["mtry"] = r.mtry;
  j["n_train"] = r.n_train;
  j["n_test"] = r.n_test;
  j["rmse_train"] = r.rmse_train;
  j["rmse_test"] = r.rmse_test;
  j["nrmse_train"] = r.nrmse_train;
  j["nrmse_test"] = r.nrmse_test;
  j["accuracy_train"] = curve_json(r.accuracy_train_at);
  j["accuracy_test"] = curve_json(r.accuracy_at);
  j["y_test"] = std::vector<double>(r.y_test.data(), r.y_test.data() + r.y_test.size());
  j["yhat_test"] = std::vector<double>(r.yhat_test.data(), r.yhat_test.data() + r.yhat_test.size());
  return j.dump(2) + "\n";
}

std::string to_json(const BaselineCurve& b) {
  ordered_json j;
  j["n_samples"] = b.n_samples;
  j["seed"] = b.seed;
  j["thresholds"] = b.thresholds;
  j["mean_accuracy"] = b.mean_accuracy;
  j["stddev"] = b.stddev;
  return j.dump(2) + "\n";
}

std::string to_json(const CvReport& r) {
  ordered_json j;
  j["folds"] = r.folds;
  j["grid"] = r.grid;
  j["mean_rmse"] = r.mean_rmse;
  j["fold_rmse"] = r.fold_rmse;
  j["best_mtry"] = r.best_mtry;
  return j.dump(2) + "\n";
}

std::string accuracy_csv(const AccuracyCurve& model, const BaselineCurve& baseline) {
  std::string out = "threshold,model_accuracy,baseline_mean,baseline_sd\n";
  for (std::size_t j = 0; j < baseline.thresholds.size(); ++j) {
    const double t = baseline.thresholds[j];
    const auto it = model.find(t);
    if (it == model.end()) throw ConfigError(fmt::format("accuracy_csv: model curve lacks threshold {}", t));
    out += fmt::format("{},{},{},{}\n", io::format_number(t), io::format_number(it->second),
                       io::format_number(baseline.mean_accuracy[j]), io::format_number(baseline.stddev[j]));
  }
  return out;
}

}  // namespace tamrf
