#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tamrf {

/// One construct: its specific items and the overall item that summarizes it.
struct FactorDef {
  std::string code;
  std::string display_name;
  std::vector<std::string> item_codes;
  std::string overall_item;
  std::string color = "#808080";
  /// Whether the overall item is a model target.
  bool is_target = true;
  /// Whether this factor's items feed other factors' External models.
  bool external_predictor = true;
};

/// Factors in display order plus dataset-level column declarations.
class ConstructSchema {
 public:
  ConstructSchema() = default;
  ConstructSchema(std::vector<FactorDef> factors, std::string id_column = "id",
                  std::string cohort_column = {}, std::string adoption_item = {},
                  std::vector<std::string> auxiliary = {});

  const std::vector<FactorDef>& factors() const noexcept { return factors_; }
  const FactorDef* find_factor(std::string_view code) const noexcept;
  const FactorDef& factor(std::string_view code) const;
  /// Factor owning `item` (specific or overall item), nullptr if none.
  const FactorDef* factor_of(std::string_view item) const noexcept;

  /// Every item and overall item, factor by factor, items before overall.
  std::vector<std::string> item_columns() const;
  /// item_columns() without the cohort flag column; these count for screening.
  std::vector<std::string> response_columns() const;

  const std::string& id_column() const noexcept { return id_column_; }
  const std::string& cohort_column() const noexcept { return cohort_column_; }
  const std::string& adoption_item() const noexcept { return adoption_item_; }
  const std::vector<std::string>& auxiliary_columns() const noexcept { return auxiliary_; }

  std::vector<const FactorDef*> target_factors() const;
  /// All other factors' non-overall items (or the overall item of a single
  /// node factor), skipping factors with external_predictor = false.
  std::vector<std::string> external_predictors(std::string_view target_factor) const;
  /// The factor's own non-overall items.
  std::vector<std::string> internal_predictors(std::string_view target_factor) const;

 private:
  std::vector<FactorDef> factors_;
  std::string id_column_ = "id";
  std::string cohort_column_;
  std::string adoption_item_;
  std::vector<std::string> auxiliary_;
};

/// Parses the INI-style schema grammar (see README "Schema files").
ConstructSchema parse_schema(std::string_view text);
ConstructSchema load_schema(const std::filesystem::path& path);

enum class Cohort { Control, PsychOwnership };
enum class Adoption { Adopter, NonAdopter };

/// Respondents x columns on the -100..100 response scale. Missing cells are
/// NaN in `values()`. Immutable once built; every operation returns a copy.
class Dataset {
 public:
  using Index = Eigen::Index;

  Dataset() = default;
  Dataset(std::vector<std::string> columns, std::vector<std::string> ids, Eigen::MatrixXd values,
          std::vector<std::optional<Cohort>> cohort = {},
          std::vector<std::optional<Adoption>> adoption = {});

  Index rows() const noexcept { return values_.rows(); }
  Index cols() const noexcept { return values_.cols(); }
  const std::vector<std::string>& columns() const noexcept { return columns_; }
  const std::vector<std::string>& ids() const noexcept { return ids_; }
  const Eigen::MatrixXd& values() const noexcept { return values_; }

  bool has_column(std::string_view code) const noexcept;
  /// Throws DataError for unknown codes.
  Index column_index(std::string_view code) const;

  bool is_missing(Index row, Index col) const { return std::isnan(values_(row, col)); }
  std::optional<int> value(Index row, std::string_view code) const;

  std::optional<Cohort> cohort(Index row) const { return cohort_[static_cast<std::size_t>(row)]; }
  std::optional<Adoption> adoption(Index row) const {
    return adoption_[static_cast<std::size_t>(row)];
  }
  const std::vector<std::optional<Adoption>>& adoption_labels() const noexcept { return adoption_; }

  /// Rows in the given order.
  Dataset select_rows(std::span<const Index> rows) const;
  Dataset with_adoption(std::vector<std::optional<Adoption>> labels) const;

  /// Gathers columns into a dense rows x codes matrix (NaN where missing).
  Eigen::MatrixXd matrix(std::span<const std::string> codes) const;
  Eigen::VectorXd column(std::string_view code) const;

 private:
  std::vector<std::string> columns_;
  std::vector<std::string> ids_;
  Eigen::MatrixXd values_;
  std::vector<std::optional<Cohort>> cohort_;
  std::vector<std::optional<Adoption>> adoption_;
};

struct ScreeningReport {
  std::size_t n_input = 0;
  std::size_t n_excluded_na = 0;
  std::size_t n_retained = 0;
  std::vector<std::string> excluded_ids;
};

std::string to_json(const ScreeningReport& report);

/// Reads a response CSV. Columns must be schema items, the id column, or
/// declared auxiliary columns; every schema item column must be present.
Dataset parse_responses(std::istream& in, const ConstructSchema& schema);
Dataset parse_responses(const std::filesystem::path& path, const ConstructSchema& schema);
/// Inverse of parse_responses (missing cells written as NA).
std::string to_csv(const Dataset& ds, const ConstructSchema& schema);

/// Keeps rows whose missing fraction over the schema's response columns is at
/// most max_na_fraction.
std::pair<Dataset, ScreeningReport> screen(const Dataset& ds, const ConstructSchema& schema,
                                           double max_na_fraction);

Dataset complete_cases(const Dataset& ds, std::span<const std::string> columns);

struct TrainTestSplit {
  Dataset train;
  Dataset test;
};

/// Uniform unstratified split; train size = floor(n * train_fraction) clamped
/// to [1, n - 1]. Rows keep their input order within each part.
TrainTestSplit split(const Dataset& ds, double train_fraction, std::uint64_t seed);

/// Adopter iff value >= 1, NonAdopter iff value <= 0, unlabeled if missing.
Dataset label_adoption(const Dataset& ds, std::string_view overall_bi_item);

}  // namespace tamrf
