#include "tamrf/importance.hpp"

#include "tamrf/error.hpp"
#include "tamrf/io.hpp"
#include "tamrf/parallel.hpp"
#include "tamrf/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iostream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace tamrf {

template <typename Tag>
WeightTable<Tag>::WeightTable(std::vector<WeightRow> rows, double sum_tolerance) : rows_(std::move(rows)) {
  std::sort(rows_.begin(), rows_.end(), [](const WeightRow& a, const WeightRow& b) {
    return std::tie(a.target, a.predictor) < std::tie(b.target, b.predictor);
  });
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& r = rows_[i];
    if (r.predictor.empty() || r.target.empty()) throw DataError("importance table: empty predictor or target code");
    if (!(r.weight >= 0.0) || !std::isfinite(r.weight))
      throw DataError(fmt::format("importance table: weight {} for ({}, {}) is not a finite nonnegative number",
                                  r.weight, r.predictor, r.target));
    if (i > 0 && rows_[i - 1].target == r.target && rows_[i - 1].predictor == r.predictor)
      throw DataError(fmt::format("importance table: duplicate row ({}, {})", r.predictor, r.target));
  }
  for (const auto& t : targets()) {
    const double s = total(t);
    if (std::abs(s - 100.0) > sum_tolerance)
      throw DataError(fmt::format("importance table: weights for target {} sum to {}, expected 100", t, s));
  }
}

template <typename Tag>
std::vector<std::string> WeightTable<Tag>::targets() const {
  std::vector<std::string> out;
  for (const auto& r : rows_)
    if (out.empty() || out.back() != r.target) out.push_back(r.target);
  return out;
}

template <typename Tag>
std::optional<double> WeightTable<Tag>::weight(std::string_view predictor, std::string_view target) const {
  for (const auto& r : rows_)
    if (r.predictor == predictor && r.target == target) return r.weight;
  return std::nullopt;
}

template <typename Tag>
double WeightTable<Tag>::total(std::string_view target) const {
  double s = 0.0;
  for (const auto& r : rows_)
    if (r.target == target) s += r.weight;
  return s;
}

template class WeightTable<ItemLevel>;
template class WeightTable<FactorLevel>;

std::map<std::string, double> relative_importance(const std::map<std::string, double>& raw) {
  double sum = 0.0;
  bool clamped = false;
  for (const auto& [k, v] : raw) {
    if (std::isnan(v)) throw ModelError(fmt::format("relative_importance: NaN importance for {}", k));
    if (v < 0.0) clamped = true;
    else sum += v;
  }
  if (clamped) std::clog << "warning: negative raw importances clamped to 0 before normalization\n";
  if (!(sum > 0.0)) throw ModelError("relative_importance: all raw importances are zero");
  std::map<std::string, double> out;
  for (const auto& [k, v] : raw) out[k] = v > 0.0 ? 100.0 * v / sum : 0.0;
  return out;
}

ImportanceTable build_importance_table(const std::map<std::string, std::map<std::string, double>>& raw) {
  std::vector<WeightRow> rows;
  for (const auto& [target, imp] : raw) {
    std::map<std::string, double> rel;
    try {
      rel = relative_importance(imp);
    } catch (const ModelError& e) {
      throw ModelError(fmt::format("importance for target {}: {}", target, e.what()));
    }
    for (const auto& [pred, w] : rel) rows.push_back({pred, target, w});
  }
  return ImportanceTable(std::move(rows));
}

ImportanceTable build_importance_table(const std::map<std::string, Forest>& models) {
  std::map<std::string, std::map<std::string, double>> raw;
  for (const auto& [target, f] : models) raw[target] = impurity_importance(f);
  return build_importance_table(raw);
}

FactorImportanceTable aggregate_factors(const ImportanceTable& t, const ConstructSchema& schema) {
  std::map<std::pair<std::string, std::string>, double> sums;
  for (const auto& r : t.rows()) {
    const auto* pf = schema.factor_of(r.predictor);
    if (!pf) throw DataError(fmt::format("aggregate_factors: predictor {} belongs to no schema factor", r.predictor));
    const auto* tf = schema.factor_of(r.target);
    const std::string target = tf && tf->overall_item == r.target ? tf->code : r.target;
    sums[{pf->code, target}] += r.weight;
  }
  std::vector<WeightRow> rows;
  for (const auto& [key, w] : sums) rows.push_back({key.first, key.second, w});
  return FactorImportanceTable(std::move(rows));
}

template <typename Tag>
std::string to_csv(const WeightTable<Tag>& t, std::optional<int> decimals) {
  std::string out = "predictor,target,weight\n";
  for (const auto& r : t.rows()) {
    const auto w = decimals ? fmt::format("{:.{}f}", r.weight, *decimals) : io::format_number(r.weight);
    out += io::csv_line({r.predictor, r.target, w});
  }
  return out;
}

template std::string to_csv(const WeightTable<ItemLevel>&, std::optional<int>);
template std::string to_csv(const WeightTable<FactorLevel>&, std::optional<int>);

std::vector<WeightRow> read_weight_rows(std::string_view csv_text) {
  std::istringstream in{std::string(csv_text)};
  const auto table = io::read_csv(in);
  auto col = [&](std::string_view name) {
    const auto it = std::find(table.header.begin(), table.header.end(), name);
    if (it == table.header.end()) throw DataError(fmt::format("importance csv: missing column '{}'", name));
    return static_cast<std::size_t>(it - table.header.begin());
  };
  const auto cp = col("predictor"), ct = col("target"), cw = col("weight");
  std::vector<WeightRow> rows;
  for (const auto& r : table.rows) {
    const auto w = io::trim(r[cw]);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(w.data(), w.data() + w.size(), v);
    if (ec != std::errc{} || ptr != w.data() + w.size())
      throw DataError(fmt::format("importance csv: weight '{}' is not a number", w));
    rows.push_back({io::trim(r[cp]), io::trim(r[ct]), v});
  }
  return rows;
}

// ---------------------------------------------------------------------------

std::vector<ModelSpec> model_specs(const ConstructSchema& schema, ModelClass model_class) {
  std::vector<ModelSpec> out;
  for (const auto* f : schema.target_factors()) {
    auto preds = model_class == ModelClass::External ? schema.external_predictors(f->code)
                                                     : schema.internal_predictors(f->code);
    if (preds.empty()) continue;
    out.push_back({f->code, f->overall_item, model_class, std::move(preds)});
  }
  return out;
}

std::map<std::string, Forest> fit_models(const Dataset& data, const std::vector<ModelSpec>& specs,
                                         const ForestConfig& cfg,
                                         const std::map<std::string, std::size_t>& mtry_by_target,
                                         std::size_t workers) {
  std::vector<Forest> fitted(specs.size());
  // Models run one after another; each forest spreads its trees over workers.
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    std::vector<std::string> cols = s.predictors;
    cols.push_back(s.target);
    const auto complete = complete_cases(data, cols);
    if (complete.rows() < 2)
      throw DataError(fmt::format("model {}: only {} complete row(s)", s.target, complete.rows()));
    ForestConfig c = cfg;
    if (const auto it = mtry_by_target.find(s.target); it != mtry_by_target.end()) c.mtry = it->second;
    c.mtry = c.mtry == 0 ? 0 : std::min(c.mtry, s.predictors.size());
    c.seed = derive_seed(cfg.seed, {0x30de1, i});
    fitted[i] = fit_forest(complete, s.target, s.predictors, c, workers);
  }
  std::map<std::string, Forest> out;
  for (std::size_t i = 0; i < specs.size(); ++i) out.emplace(specs[i].target, std::move(fitted[i]));
  return out;
}

SegmentedImportance segment_importance(const Dataset& ds, const ConstructSchema& schema, const ForestConfig& cfg,
                                       std::uint64_t seed, const SegmentOptions& opts) {
  std::vector<Eigen::Index> adopters, non_adopters;
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    const auto a = ds.adoption(r);
    if (!a) continue;
    (*a == Adoption::Adopter ? adopters : non_adopters).push_back(r);
  }
  auto check = [&](const std::vector<Eigen::Index>& rows, const char* name) {
    if (rows.size() < opts.min_size)
      throw DataError(fmt::format("segment {} has {} labeled row(s), below the minimum of {}", name, rows.size(),
                                  opts.min_size));
  };
  check(adopters, "Adopter");
  check(non_adopters, "NonAdopter");

  const auto specs = model_specs(schema, ModelClass::External);
  auto table_for = [&](const std::vector<Eigen::Index>& rows, std::uint64_t segment) {
    ForestConfig c = cfg;
    c.seed = derive_seed(seed, {0x5e6, segment});
    return build_importance_table(fit_models(ds.select_rows(rows), specs, c, opts.mtry_by_target, opts.workers));
  };
  SegmentedImportance out;
  out.adopter = table_for(adopters, 0);
  out.non_adopter = table_for(non_adopters, 1);
  out.n_adopter = adopters.size();
  out.n_non_adopter = non_adopters.size();
  return out;
}

}  // namespace tamrf
