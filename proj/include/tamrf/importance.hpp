#pragma once

#include "tamrf/evaluate.hpp"
#include "tamrf/forest.hpp"
#include "tamrf/schema.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tamrf {

struct WeightRow {
  std::string predictor;
  std::string target;
  /// Percentage; per target the weights sum to 100.
  double weight = 0.0;
};

/// Rows of (predictor, target, weight) keyed uniquely by (predictor, target)
/// and kept sorted by (target, predictor). Construction checks that weights
/// are nonnegative and that every target's weights sum to 100 within
/// `sum_tolerance`.
template <typename Tag>
class WeightTable {
 public:
  WeightTable() = default;
  explicit WeightTable(std::vector<WeightRow> rows, double sum_tolerance = 1e-6);

  const std::vector<WeightRow>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }
  std::vector<std::string> targets() const;
  std::optional<double> weight(std::string_view predictor, std::string_view target) const;
  double total(std::string_view target) const;

 private:
  std::vector<WeightRow> rows_;
};

struct ItemLevel;
struct FactorLevel;
/// Item-level relative importance (predictor item -> target item).
using ImportanceTable = WeightTable<ItemLevel>;
/// Factor-level relative importance (predictor factor -> target factor).
using FactorImportanceTable = WeightTable<FactorLevel>;

extern template class WeightTable<ItemLevel>;
extern template class WeightTable<FactorLevel>;

/// 100 * raw / sum(raw). Negative entries are clamped to 0 with a warning on
/// stderr. Throws ModelError when nothing positive remains.
std::map<std::string, double> relative_importance(const std::map<std::string, double>& raw);

/// One table from per-target raw importances (target -> feature -> raw).
ImportanceTable build_importance_table(const std::map<std::string, std::map<std::string, double>>& raw);
/// Same, using each forest's impurity importance; keyed by target item.
ImportanceTable build_importance_table(const std::map<std::string, Forest>& models);

/// Sums item weights into their factors. Targets that are a factor's overall
/// item are renamed to that factor's code. Throws DataError on items unknown
/// to the schema.
FactorImportanceTable aggregate_factors(const ImportanceTable& t, const ConstructSchema& schema);

/// predictor,target,weight. `decimals` rounds weights for presentation;
/// omit it for lossless output.
template <typename Tag>
std::string to_csv(const WeightTable<Tag>& t, std::optional<int> decimals = std::nullopt);
std::vector<WeightRow> read_weight_rows(std::string_view csv_text);

// ---------------------------------------------------------------------------
// Model families

struct ModelSpec {
  std::string target_factor;
  std::string target;
  ModelClass model_class = ModelClass::External;
  std::vector<std::string> predictors;
};

/// One model per target factor of the schema for the given class; Internal
/// models are skipped for factors without specific items.
std::vector<ModelSpec> model_specs(const ConstructSchema& schema, ModelClass model_class);

/// Fits every spec on complete cases of `data` over its own columns.
/// Forest seed for spec i is derived from (cfg.seed, i); `mtry_by_target`
/// overrides cfg.mtry per target item.
std::map<std::string, Forest> fit_models(const Dataset& data, const std::vector<ModelSpec>& specs,
                                         const ForestConfig& cfg,
                                         const std::map<std::string, std::size_t>& mtry_by_target = {},
                                         std::size_t workers = 1);

struct SegmentOptions {
  std::size_t min_size = 20;
  std::map<std::string, std::size_t> mtry_by_target;
  std::size_t workers = 1;
};

struct SegmentedImportance {
  ImportanceTable adopter;
  ImportanceTable non_adopter;
  std::size_t n_adopter = 0;
  std::size_t n_non_adopter = 0;
};

/// External-class tables fitted separately on adopters and non-adopters.
/// Requires adoption labels; throws DataError when a segment has fewer than
/// opts.min_size rows.
SegmentedImportance segment_importance(const Dataset& ds, const ConstructSchema& schema, const ForestConfig& cfg,
                                       std::uint64_t seed, const SegmentOptions& opts = {});

}  // namespace tamrf
