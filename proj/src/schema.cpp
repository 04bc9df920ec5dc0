#include "tamrf/schema.hpp"

#include "tamrf/error.hpp"
#include "tamrf/io.hpp"
#include "tamrf/rng.hpp"

#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include <fmt/format.h>

namespace tamrf {

namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

bool parse_bool(const std::string& key, const std::string& v, int line) {
  if (v == "true" || v == "yes" || v == "1") return true;
  if (v == "false" || v == "no" || v == "0") return false;
  throw ConfigError(fmt::format("schema line {}: '{}' expects true/false, got '{}'", line, key, v));
}

bool is_hex_color(std::string_view c) {
  if (c.size() != 7 || c[0] != '#') return false;
  return std::all_of(c.begin() + 1, c.end(),
                     [](char ch) { return std::isxdigit(static_cast<unsigned char>(ch)) != 0; });
}

}  // namespace

// ---------------------------------------------------------------------------
// ConstructSchema

ConstructSchema::ConstructSchema(std::vector<FactorDef> factors, std::string id_column,
                                 std::string cohort_column, std::string adoption_item,
                                 std::vector<std::string> auxiliary)
    : factors_(std::move(factors)),
      id_column_(std::move(id_column)),
      cohort_column_(std::move(cohort_column)),
      adoption_item_(std::move(adoption_item)),
      auxiliary_(std::move(auxiliary)) {
  if (factors_.empty()) throw ConfigError("schema: no factors defined");
  std::set<std::string> factor_codes;
  std::set<std::string> seen;
  auto claim = [&](const std::string& code, const std::string& owner) {
    if (code.empty()) throw ConfigError(fmt::format("schema: factor {} has an empty item code", owner));
    if (!seen.insert(code).second)
      throw ConfigError(fmt::format("schema: duplicate item code '{}' (factor {})", code, owner));
  };
  for (const auto& f : factors_) {
    if (f.code.empty()) throw ConfigError("schema: factor with empty code");
    if (!factor_codes.insert(f.code).second)
      throw ConfigError(fmt::format("schema: duplicate factor code '{}'", f.code));
    if (f.overall_item.empty())
      throw ConfigError(fmt::format("schema: factor {} has no overall item", f.code));
    if (std::find(f.item_codes.begin(), f.item_codes.end(), f.overall_item) != f.item_codes.end())
      throw ConfigError(fmt::format("schema: overall item '{}' of factor {} is also listed among its items",
                                    f.overall_item, f.code));
    if (!is_hex_color(f.color))
      throw ConfigError(fmt::format("schema: factor {} color '{}' is not #rrggbb", f.code, f.color));
    for (const auto& item : f.item_codes) claim(item, f.code);
    claim(f.overall_item, f.code);
  }
  for (const auto& aux : auxiliary_) {
    if (seen.count(aux)) throw ConfigError(fmt::format("schema: auxiliary column '{}' is also an item", aux));
    if (aux == id_column_) throw ConfigError("schema: auxiliary column equals the id column");
  }
  if (seen.count(id_column_)) throw ConfigError("schema: id column collides with an item code");
  if (!cohort_column_.empty() && !seen.count(cohort_column_))
    throw ConfigError(fmt::format("schema: cohort column '{}' is not an item of any factor", cohort_column_));
  if (!adoption_item_.empty() && !seen.count(adoption_item_))
    throw ConfigError(fmt::format("schema: adoption item '{}' is not an item of any factor", adoption_item_));
}

const FactorDef* ConstructSchema::find_factor(std::string_view code) const noexcept {
  for (const auto& f : factors_)
    if (f.code == code) return &f;
  return nullptr;
}

const FactorDef& ConstructSchema::factor(std::string_view code) const {
  if (const auto* f = find_factor(code)) return *f;
  throw ConfigError(fmt::format("schema: unknown factor '{}'", code));
}

const FactorDef* ConstructSchema::factor_of(std::string_view item) const noexcept {
  for (const auto& f : factors_) {
    if (f.overall_item == item) return &f;
    if (std::find(f.item_codes.begin(), f.item_codes.end(), item) != f.item_codes.end()) return &f;
  }
  return nullptr;
}

std::vector<std::string> ConstructSchema::item_columns() const {
  std::vector<std::string> out;
  for (const auto& f : factors_) {
    out.insert(out.end(), f.item_codes.begin(), f.item_codes.end());
    out.push_back(f.overall_item);
  }
  return out;
}

std::vector<std::string> ConstructSchema::response_columns() const {
  auto cols = item_columns();
  std::erase(cols, cohort_column_);
  return cols;
}

std::vector<const FactorDef*> ConstructSchema::target_factors() const {
  std::vector<const FactorDef*> out;
  for (const auto& f : factors_)
    if (f.is_target) out.push_back(&f);
  return out;
}

std::vector<std::string> ConstructSchema::external_predictors(std::string_view target_factor) const {
  factor(target_factor);
  std::vector<std::string> out;
  for (const auto& f : factors_) {
    if (f.code == target_factor || !f.external_predictor) continue;
    if (f.item_codes.empty())
      out.push_back(f.overall_item);
    else
      out.insert(out.end(), f.item_codes.begin(), f.item_codes.end());
  }
  return out;
}

std::vector<std::string> ConstructSchema::internal_predictors(std::string_view target_factor) const {
  return factor(target_factor).item_codes;
}

// Grammar:
//   # comment (whole lines only, '#' or ';')
//   [dataset]            id_column, cohort_column, adoption_item, auxiliary
//   [factor CODE]        name, items, overall, color, target, external_predictor
// Lists are comma- or whitespace-separated.
ConstructSchema parse_schema(std::string_view text) {
  std::vector<FactorDef> factors;
  std::string id_column = "id", cohort, adoption;
  std::vector<std::string> auxiliary;
  enum class Section { None, Dataset, Factor } section = Section::None;
  std::set<std::string> keys_in_section;

  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto line = io::trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(fmt::format("schema line {}: unterminated section", line_no));
      const auto parts = io::split_list(line.substr(1, line.size() - 2));
      keys_in_section.clear();
      if (parts.size() == 1 && parts[0] == "dataset") {
        section = Section::Dataset;
      } else if (parts.size() == 2 && parts[0] == "factor") {
        section = Section::Factor;
        FactorDef f;
        f.code = parts[1];
        f.display_name = parts[1];
        factors.push_back(std::move(f));
      } else {
        throw ConfigError(fmt::format("schema line {}: unknown section '{}'", line_no, line));
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(fmt::format("schema line {}: expected key = value", line_no));
    const auto key = io::trim(line.substr(0, eq));
    const auto value = io::trim(line.substr(eq + 1));
    if (!keys_in_section.insert(key).second)
      throw ConfigError(fmt::format("schema line {}: duplicate key '{}'", line_no, key));

    if (section == Section::Dataset) {
      if (key == "id_column") id_column = value;
      else if (key == "cohort_column") cohort = value;
      else if (key == "adoption_item") adoption = value;
      else if (key == "auxiliary") auxiliary = io::split_list(value);
      else throw ConfigError(fmt::format("schema line {}: unknown dataset key '{}'", line_no, key));
    } else if (section == Section::Factor) {
      auto& f = factors.back();
      if (key == "name") f.display_name = value;
      else if (key == "items") f.item_codes = io::split_list(value);
      else if (key == "overall") f.overall_item = value;
      else if (key == "color") f.color = value;
      else if (key == "target") f.is_target = parse_bool(key, value, line_no);
      else if (key == "external_predictor") f.external_predictor = parse_bool(key, value, line_no);
      else throw ConfigError(fmt::format("schema line {}: unknown factor key '{}'", line_no, key));
    } else {
      throw ConfigError(fmt::format("schema line {}: key outside of a section", line_no));
    }
  }
  return ConstructSchema(std::move(factors), std::move(id_column), std::move(cohort), std::move(adoption),
                         std::move(auxiliary));
}

ConstructSchema load_schema(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError(fmt::format("schema file not found: {}", path.string()));
  return parse_schema(io::read_text_file(path));
}

// ---------------------------------------------------------------------------
// Dataset

Dataset::Dataset(std::vector<std::string> columns, std::vector<std::string> ids, Eigen::MatrixXd values,
                 std::vector<std::optional<Cohort>> cohort, std::vector<std::optional<Adoption>> adoption)
    : columns_(std::move(columns)),
      ids_(std::move(ids)),
      values_(std::move(values)),
      cohort_(std::move(cohort)),
      adoption_(std::move(adoption)) {
  const auto n = static_cast<std::size_t>(values_.rows());
  if (static_cast<std::size_t>(values_.cols()) != columns_.size())
    throw DataError("dataset: column count does not match value matrix");
  if (ids_.size() != n) throw DataError("dataset: id count does not match row count");
  if (cohort_.empty()) cohort_.resize(n);
  if (adoption_.empty()) adoption_.resize(n);
  if (cohort_.size() != n || adoption_.size() != n) throw DataError("dataset: label vectors do not match rows");
  std::unordered_set<std::string> unique(columns_.begin(), columns_.end());
  if (unique.size() != columns_.size()) throw DataError("dataset: duplicate column");
  for (Index c = 0; c < values_.cols(); ++c)
    for (Index r = 0; r < values_.rows(); ++r) {
      const double v = values_(r, c);
      if (std::isnan(v)) continue;
      if (v < -100.0 || v > 100.0 || v != std::round(v))
        throw DataError(fmt::format("dataset: value {} in column {} is not an integer in [-100, 100]", v,
                                    columns_[static_cast<std::size_t>(c)]));
    }
}

bool Dataset::has_column(std::string_view code) const noexcept {
  return std::find(columns_.begin(), columns_.end(), code) != columns_.end();
}

Dataset::Index Dataset::column_index(std::string_view code) const {
  const auto it = std::find(columns_.begin(), columns_.end(), code);
  if (it == columns_.end()) throw DataError(fmt::format("unknown column '{}'", code));
  return static_cast<Index>(it - columns_.begin());
}

std::optional<int> Dataset::value(Index row, std::string_view code) const {
  const double v = values_(row, column_index(code));
  if (std::isnan(v)) return std::nullopt;
  return static_cast<int>(v);
}

Dataset Dataset::select_rows(std::span<const Index> rows) const {
  Eigen::MatrixXd vals(static_cast<Index>(rows.size()), values_.cols());
  std::vector<std::string> ids;
  std::vector<std::optional<Cohort>> cohort;
  std::vector<std::optional<Adoption>> adoption;
  ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    vals.row(static_cast<Index>(i)) = values_.row(r);
    ids.push_back(ids_[static_cast<std::size_t>(r)]);
    cohort.push_back(cohort_[static_cast<std::size_t>(r)]);
    adoption.push_back(adoption_[static_cast<std::size_t>(r)]);
  }
  return Dataset(columns_, std::move(ids), std::move(vals), std::move(cohort), std::move(adoption));
}

Dataset Dataset::with_adoption(std::vector<std::optional<Adoption>> labels) const {
  Dataset out = *this;
  if (labels.size() != static_cast<std::size_t>(rows())) throw DataError("dataset: adoption label count mismatch");
  out.adoption_ = std::move(labels);
  return out;
}

Eigen::MatrixXd Dataset::matrix(std::span<const std::string> codes) const {
  Eigen::MatrixXd m(rows(), static_cast<Index>(codes.size()));
  for (std::size_t j = 0; j < codes.size(); ++j) m.col(static_cast<Index>(j)) = values_.col(column_index(codes[j]));
  return m;
}

Eigen::VectorXd Dataset::column(std::string_view code) const { return values_.col(column_index(code)); }

// ---------------------------------------------------------------------------
// Ingestion

std::string to_json(const ScreeningReport& report) {
  nlohmann::ordered_json j;
  j["n_input"] = report.n_input;
  j["n_excluded_na"] = report.n_excluded_na;
  j["n_retained"] = report.n_retained;
  j["excluded_ids"] = report.excluded_ids;
  return j.dump(2) + "\n";
}

Dataset parse_responses(std::istream& in, const ConstructSchema& schema) {
  const auto table = io::read_csv(in);
  const auto items = schema.item_columns();
  const std::set<std::string> item_set(items.begin(), items.end());
  const std::set<std::string> aux_set(schema.auxiliary_columns().begin(), schema.auxiliary_columns().end());

  std::optional<std::size_t> id_field;
  std::set<std::string> header_seen;
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    const auto& h = table.header[i];
    if (!header_seen.insert(h).second) throw DataError(fmt::format("duplicate column '{}' in header", h));
    if (h == schema.id_column()) id_field = i;
    else if (!item_set.count(h) && !aux_set.count(h))
      throw DataError(fmt::format("unknown column '{}' (not a schema item or declared auxiliary column)", h));
  }
  std::vector<std::string> columns;
  for (const auto& item : items) {
    if (!header_seen.count(item)) throw DataError(fmt::format("missing declared column '{}'", item));
    columns.push_back(item);
  }
  for (const auto& aux : schema.auxiliary_columns())
    if (header_seen.count(aux)) columns.push_back(aux);

  std::vector<std::size_t> field_of(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c)
    field_of[c] = static_cast<std::size_t>(
        std::find(table.header.begin(), table.header.end(), columns[c]) - table.header.begin());

  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Eigen::MatrixXd values(n, static_cast<Eigen::Index>(columns.size()));
  std::vector<std::string> ids;
  std::vector<std::optional<Cohort>> cohort(table.rows.size());
  const auto cohort_col = schema.cohort_column().empty()
                              ? columns.size()
                              : static_cast<std::size_t>(
                                    std::find(columns.begin(), columns.end(), schema.cohort_column()) -
                                    columns.begin());

  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    ids.push_back(id_field ? row[*id_field] : fmt::format("r{}", r + 1));
    for (std::size_t c = 0; c < columns.size(); ++c) {
      const auto cell = io::trim(row[field_of[c]]);
      double v = kMissing;
      if (!cell.empty() && cell != "NA") {
        long parsed = 0;
        const auto* end = cell.data() + cell.size();
        const auto [ptr, ec] = std::from_chars(cell.data() + (cell.front() == '+' ? 1 : 0), end, parsed);
        if (ec != std::errc{} || ptr != end)
          throw DataError(fmt::format("row {} ({}), column {}: '{}' is not an integer", r + 1, ids.back(),
                                      columns[c], cell));
        if (parsed < -100 || parsed > 100)
          throw DataError(fmt::format("row {} ({}), column {}: value {} outside [-100, 100]", r + 1, ids.back(),
                                      columns[c], parsed));
        v = static_cast<double>(parsed);
      }
      values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
      if (c == cohort_col && !std::isnan(v)) {
        if (v == 0.0) cohort[r] = Cohort::Control;
        else if (v == 1.0) cohort[r] = Cohort::PsychOwnership;
        else
          throw DataError(fmt::format("row {} ({}): cohort column {} must be 0 or 1, got {}", r + 1, ids.back(),
                                      columns[c], v));
      }
    }
  }
  return Dataset(std::move(columns), std::move(ids), std::move(values), std::move(cohort));
}

Dataset parse_responses(const std::filesystem::path& path, const ConstructSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(fmt::format("cannot open data file {}", path.string()));
  return parse_responses(in, schema);
}

std::string to_csv(const Dataset& ds, const ConstructSchema& schema) {
  std::vector<std::string> header{schema.id_column()};
  header.insert(header.end(), ds.columns().begin(), ds.columns().end());
  std::string out = io::csv_line(header);
  std::vector<std::string> fields;
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    fields.clear();
    fields.push_back(ds.ids()[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < ds.cols(); ++c) {
      const double v = ds.values()(r, c);
      fields.push_back(std::isnan(v) ? "NA" : fmt::format("{}", static_cast<long>(v)));
    }
    out += io::csv_line(fields);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Row filters

std::pair<Dataset, ScreeningReport> screen(const Dataset& ds, const ConstructSchema& schema,
                                           double max_na_fraction) {
  if (!(max_na_fraction >= 0.0 && max_na_fraction <= 1.0))
    throw ConfigError(fmt::format("screening threshold {} outside [0, 1]", max_na_fraction));
  std::vector<Eigen::Index> cols;
  for (const auto& code : schema.response_columns())
    if (ds.has_column(code)) cols.push_back(ds.column_index(code));

  ScreeningReport report;
  report.n_input = static_cast<std::size_t>(ds.rows());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    std::size_t missing = 0;
    for (auto c : cols) missing += ds.is_missing(r, c) ? 1 : 0;
    // Strictly more than the threshold is excluded.
    const bool excluded = !cols.empty() &&
                          static_cast<double>(missing) > max_na_fraction * static_cast<double>(cols.size()) + 1e-9;
    if (excluded)
      report.excluded_ids.push_back(ds.ids()[static_cast<std::size_t>(r)]);
    else
      keep.push_back(r);
  }
  report.n_excluded_na = report.excluded_ids.size();
  report.n_retained = keep.size();
  return {ds.select_rows(keep), std::move(report)};
}

Dataset complete_cases(const Dataset& ds, std::span<const std::string> columns) {
  std::vector<Eigen::Index> cols;
  for (const auto& c : columns) cols.push_back(ds.column_index(c));
  std::vector<Eigen::Index> keep;
  for (Eigen::Index r = 0; r < ds.rows(); ++r)
    if (std::none_of(cols.begin(), cols.end(), [&](auto c) { return ds.is_missing(r, c); })) keep.push_back(r);
  return ds.select_rows(keep);
}

TrainTestSplit split(const Dataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ConfigError(fmt::format("train fraction {} outside (0, 1)", train_fraction));
  const auto n = static_cast<std::size_t>(ds.rows());
  if (n < 2) throw DataError(fmt::format("cannot split {} row(s) into train and test", n));
  auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * train_fraction + 1e-9));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  auto rng = make_rng(seed, {0x5b17});
  shuffle(order.begin(), order.end(), rng);
  std::vector<Eigen::Index> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<Eigen::Index> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {ds.select_rows(train), ds.select_rows(test)};
}

Dataset label_adoption(const Dataset& ds, std::string_view overall_bi_item) {
  const auto c = ds.column_index(overall_bi_item);
  std::vector<std::optional<Adoption>> labels(static_cast<std::size_t>(ds.rows()));
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    if (ds.is_missing(r, c)) continue;
    labels[static_cast<std::size_t>(r)] = ds.values()(r, c) >= 1.0 ? Adoption::Adopter : Adoption::NonAdopter;
  }
  return ds.with_adoption(std::move(labels));
}

}  // namespace tamrf
