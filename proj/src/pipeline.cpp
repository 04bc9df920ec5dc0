#include "tamrf/pipeline.hpp"

#include "tamrf/error.hpp"
#include "tamrf/evaluate.hpp"
#include "tamrf/importance.hpp"
#include "tamrf/io.hpp"
#include "tamrf/rng.hpp"
#include "tamrf/stats.hpp"

#include <fmt/format.h>

#include "json.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace tamrf {

using nlohmann::json;
using nlohmann::ordered_json;
namespace fs = std::filesystem;

fs::path RunConfig::resolve(const fs::path& p) const {
  if (p.empty() || p.is_absolute()) return p;
  return base_dir / p;
}

namespace {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("run config: bad value for '{}': {}", key, e.what()));
  }
}

SyntheticSpec parse_synthetic(const json& j) {
  SyntheticSpec s;
  s.n = get_or<std::size_t>(j, "n", s.n);
  s.adopter_fraction = get_or(j, "adopter_fraction", s.adopter_fraction);
  if (j.contains("adopter_means")) s.adopter_means = get_or(j, "adopter_means", s.adopter_means);
  if (j.contains("non_adopter_means")) s.non_adopter_means = get_or(j, "non_adopter_means", s.non_adopter_means);
  s.latent_sd = get_or(j, "latent_sd", s.latent_sd);
  s.latent_correlation = get_or(j, "latent_correlation", s.latent_correlation);
  s.noise_sd = get_or(j, "noise_sd", s.noise_sd);
  s.missing_rate = get_or(j, "missing_rate", s.missing_rate);
  s.cohort_split = get_or(j, "cohort_split", s.cohort_split);
  s.signal = get_or(j, "signal", s.signal);
  s.validate();
  return s;
}

ordered_json synthetic_json(const SyntheticSpec& s) {
  ordered_json j;
  j["n"] = s.n;
  j["adopter_fraction"] = s.adopter_fraction;
  j["adopter_means"] = s.adopter_means;
  j["non_adopter_means"] = s.non_adopter_means;
  j["latent_sd"] = s.latent_sd;
  j["latent_correlation"] = s.latent_correlation;
  j["noise_sd"] = s.noise_sd;
  j["missing_rate"] = s.missing_rate;
  j["cohort_split"] = s.cohort_split;
  j["signal"] = s.signal;
  return j;
}

void validate(const RunConfig& c) {
  if (c.schema.empty()) throw ConfigError("run config: 'schema' is required");
  if (c.data.empty() && !c.synthetic) throw ConfigError("run config: one of 'data' or 'synthetic' is required");
  if (!c.data.empty() && c.synthetic) throw ConfigError("run config: 'data' and 'synthetic' are exclusive");
  if (!(c.screening_threshold >= 0.0 && c.screening_threshold <= 1.0))
    throw ConfigError("run config: screening_threshold must lie in [0, 1]");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
    throw ConfigError("run config: train_fraction must lie in (0, 1)");
  if (c.folds < 2) throw ConfigError("run config: folds must be at least 2");
  if (c.forest.n_trees == 0) throw ConfigError("run config: forest.n_trees must be positive");
  if (c.forest.min_node_size == 0) throw ConfigError("run config: forest.min_node_size must be positive");
  if (!(c.threshold_step > 0.0 && c.threshold_step <= 200.0))
    throw ConfigError("run config: threshold_step must lie in (0, 200]");
  if (c.baseline_samples == 0) throw ConfigError("run config: baseline_samples must be positive");
  for (auto m : c.mtry_grid)
    if (m == 0) throw ConfigError("run config: mtry_grid entries must be positive");
}

}  // namespace

RunConfig parse_run_config(std::string_view json_text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("run config: {}", e.what()));
  }
  if (!j.is_object()) throw ConfigError("run config: top level must be an object");
  static const std::vector<std::string> known{
      "schema", "data", "synthetic", "seed", "screening_threshold", "train_fraction", "mtry_grid",
      "folds", "forest", "cv_trees", "threshold_step", "baseline_samples", "segment_min_size",
      "chord", "output_dir"};
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end())
      throw ConfigError(fmt::format("run config: unknown key '{}'", k));
  if (!j.contains("seed")) throw ConfigError("run config: 'seed' is mandatory");

  RunConfig c;
  c.base_dir = base_dir;
  c.schema = get_or<std::string>(j, "schema", "");
  c.data = get_or<std::string>(j, "data", "");
  if (j.contains("synthetic")) c.synthetic = parse_synthetic(j.at("synthetic"));
  c.seed = get_or<std::uint64_t>(j, "seed", 0);
  c.screening_threshold = get_or(j, "screening_threshold", c.screening_threshold);
  c.train_fraction = get_or(j, "train_fraction", c.train_fraction);
  c.mtry_grid = get_or(j, "mtry_grid", c.mtry_grid);
  c.folds = get_or(j, "folds", c.folds);
  if (j.contains("forest")) {
    const auto& f = j.at("forest");
    c.forest.n_trees = get_or(f, "n_trees", c.forest.n_trees);
    c.forest.min_node_size = get_or(f, "min_node_size", c.forest.min_node_size);
    if (f.contains("max_depth") && !f.at("max_depth").is_null())
      c.forest.max_depth = get_or<std::size_t>(f, "max_depth", 0);
  }
  c.cv_trees = get_or(j, "cv_trees", c.cv_trees);
  c.threshold_step = get_or(j, "threshold_step", c.threshold_step);
  c.baseline_samples = get_or(j, "baseline_samples", c.baseline_samples);
  c.segment_min_size = get_or(j, "segment_min_size", c.segment_min_size);
  if (j.contains("chord")) {
    const auto& ch = j.at("chord");
    c.chord_layout.gap_degrees = get_or(ch, "gap_degrees", c.chord_layout.gap_degrees);
    c.chord_layout.group_gap_degrees = get_or(ch, "group_gap_degrees", c.chord_layout.group_gap_degrees);
    c.chord_layout.min_render_weight = get_or(ch, "min_render_weight", c.chord_layout.min_render_weight);
    c.chord_layout.start_angle = get_or(ch, "start_angle", c.chord_layout.start_angle);
    c.chord_style.size_px = get_or(ch, "size_px", c.chord_style.size_px);
  }
  c.output_dir = get_or<std::string>(j, "output_dir", c.output_dir.string());
  validate(c);
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError(fmt::format("run config not found: {}", path.string()));
  return parse_run_config(io::read_text_file(path), path.parent_path().empty() ? fs::path(".") : path.parent_path());
}

std::string canonical_config_json(const RunConfig& c) {
  // Inputs are identified by content, not by path, so moving a bundle around
  // does not change the hash.
  ordered_json j;
  const auto schema_path = c.resolve(c.schema);
  j["schema_sha256"] = fs::exists(schema_path) ? io::sha256_hex(io::read_text_file(schema_path)) : "";
  if (!c.data.empty()) {
    const auto data_path = c.resolve(c.data);
    j["data_sha256"] = fs::exists(data_path) ? io::sha256_hex(io::read_text_file(data_path)) : "";
  }
  if (c.synthetic) j["synthetic"] = synthetic_json(*c.synthetic);
  j["seed"] = c.seed;
  j["screening_threshold"] = c.screening_threshold;
  j["train_fraction"] = c.train_fraction;
  j["mtry_grid"] = c.mtry_grid;
  j["folds"] = c.folds;
  j["forest"] = {{"n_trees", c.forest.n_trees},
                 {"min_node_size", c.forest.min_node_size},
                 {"max_depth", c.forest.max_depth ? ordered_json(*c.forest.max_depth) : ordered_json(nullptr)}};
  j["cv_trees"] = c.cv_trees;
  j["threshold_step"] = c.threshold_step;
  j["baseline_samples"] = c.baseline_samples;
  j["segment_min_size"] = c.segment_min_size;
  j["chord"] = {{"gap_degrees", c.chord_layout.gap_degrees},
                {"group_gap_degrees", c.chord_layout.group_gap_degrees},
                {"min_render_weight", c.chord_layout.min_render_weight},
                {"start_angle", c.chord_layout.start_angle},
                {"size_px", c.chord_style.size_px}};
  return j.dump();
}

namespace {

// Rethrows library errors with the stage name prepended, keeping the type so
// the CLI exit code is preserved.
template <typename Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ConfigError& e) {
    throw ConfigError(fmt::format("[{}] {}", name, e.what()));
  } catch (const DataError& e) {
    throw DataError(fmt::format("[{}] {}", name, e.what()));
  } catch (const ModelError& e) {
    throw ModelError(fmt::format("[{}] {}", name, e.what()));
  }
}

class Bundle {
 public:
  explicit Bundle(fs::path root) : root_(std::move(root)) {}
  void write(const std::string& rel, std::string_view content) {
    io::write_text_file(root_ / rel, content);
    checksums_[rel] = io::sha256_hex(content);
  }
  const std::map<std::string, std::string>& checksums() const { return checksums_; }
  const fs::path& root() const { return root_; }

 private:
  fs::path root_;
  std::map<std::string, std::string> checksums_;
};

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

}  // namespace

RunResult run_pipeline(const RunConfig& cfg, std::size_t workers) {
  validate(cfg);
  // Everything that can fail on bad input happens before the output
  // directory is touched.
  const auto schema = stage("config", [&] { return load_schema(cfg.resolve(cfg.schema)); });
  Dataset raw = stage("ingest", [&] {
    if (cfg.synthetic) return generate_synthetic(*cfg.synthetic, schema, derive_seed(cfg.seed, {0x5e7}));
    const auto p = cfg.resolve(cfg.data);
    if (!fs::exists(p)) throw ConfigError(fmt::format("data file not found: {}", p.string()));
    return parse_responses(p, schema);
  });
  if (schema.adoption_item().empty())
    throw ConfigError("[config] schema must declare adoption_item for segmentation");

  RunResult result;
  result.output_dir = cfg.resolve(cfg.output_dir);
  result.config_sha256 = io::sha256_hex(canonical_config_json(cfg));
  Bundle out(result.output_dir);

  const auto [screened, screening] = stage("screen", [&] { return screen(raw, schema, cfg.screening_threshold); });
  out.write("reports/screening.json", to_json(screening));

  const auto items = schema.item_columns();
  const Dataset complete = stage("complete_cases", [&] { return complete_cases(screened, items); });
  const auto parts = stage("split", [&] { return split(complete, cfg.train_fraction, derive_seed(cfg.seed, {0x5b1})); });

  const auto thresholds = threshold_grid(cfg.threshold_step);
  ForestConfig cv_forest = cfg.forest;
  if (cfg.cv_trees > 0) cv_forest.n_trees = cfg.cv_trees;

  std::string performance = "target,class,mtry,n_train,n_test,rmse_train,rmse_test,nrmse_train,nrmse_test\n";
  std::map<ModelClass, std::map<std::string, Forest>> forests;
  std::map<std::string, std::size_t> external_mtry;

  for (ModelClass cls : {ModelClass::External, ModelClass::Internal}) {
    const auto specs = model_specs(schema, cls);
    const auto cls_key = static_cast<std::uint64_t>(cls);
    for (std::size_t i = 0; i < specs.size(); ++i) {
      const auto& spec = specs[i];
      const std::string tag = fmt::format("{}:{}", to_string(cls), spec.target);
      const std::size_t p = spec.predictors.size();

      std::vector<std::size_t> grid;
      for (auto m : cfg.mtry_grid)
        if (m <= p) grid.push_back(m);
      std::sort(grid.begin(), grid.end());
      grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
      if (grid.empty()) grid = default_mtry_grid(p);

      const auto cv = stage(("cv " + tag).c_str(), [&] {
        return cross_validate(parts.train, spec.target, spec.predictors, grid, cfg.folds, cv_forest,
                              derive_seed(cfg.seed, {0xc7, cls_key, i}), workers);
      });

      ForestConfig fc = cfg.forest;
      fc.mtry = cv.best_mtry;
      fc.seed = derive_seed(cfg.seed, {0xf17, cls_key, i});
      Forest forest = stage(("fit " + tag).c_str(),
                            [&] { return fit_forest(parts.train, spec.target, spec.predictors, fc, workers); });
      const auto report = stage(("evaluate " + tag).c_str(),
                                [&] { return evaluate_model(forest, parts.train, parts.test, cls, thresholds); });
      const auto baseline = stage(("baseline " + tag).c_str(), [&] {
        return random_baseline(report.y_test, cfg.baseline_samples, thresholds,
                               derive_seed(cfg.seed, {0xba5e, cls_key, i}), workers);
      });

      const std::string dir = lower(to_string(cls));
      ordered_json rj;
      rj["evaluation"] = ordered_json::parse(to_json(report));
      rj["cross_validation"] = ordered_json::parse(to_json(cv));
      rj["baseline"] = ordered_json::parse(to_json(baseline));
      out.write(fmt::format("reports/{}/{}.json", dir, spec.target), rj.dump(2) + "\n");
      out.write(fmt::format("tables/accuracy_{}_{}.csv", dir, spec.target),
                accuracy_csv(report.accuracy_at, baseline));
      performance += fmt::format("{},{},{},{},{},{},{},{},{}\n", spec.target, to_string(cls), report.mtry,
                                 report.n_train, report.n_test, io::format_number(report.rmse_train),
                                 io::format_number(report.rmse_test), io::format_number(report.nrmse_train),
                                 io::format_number(report.nrmse_test));
      if (cls == ModelClass::External) external_mtry[spec.target] = cv.best_mtry;
      forests[cls].emplace(spec.target, std::move(forest));
    }
  }
  out.write("tables/model_performance.csv", performance);

  auto chord = [&](const std::string& name, const std::vector<WeightRow>& rows) {
    const auto l = stage(("chord " + name).c_str(), [&] { return layout(rows, schema, cfg.chord_layout); });
    out.write(fmt::format("figures/{}.svg", name), render_svg(l, cfg.chord_style));
    out.write(fmt::format("figures/{}.layout.json", name), layout_json(l));
  };

  const auto external = stage("importance", [&] { return build_importance_table(forests[ModelClass::External]); });
  const auto internal = stage("importance", [&] { return build_importance_table(forests[ModelClass::Internal]); });
  const auto external_factors = stage("importance", [&] { return aggregate_factors(external, schema); });
  out.write("tables/importance_external.csv", to_csv(external));
  out.write("tables/importance_internal.csv", to_csv(internal));
  out.write("tables/factor_importance_external.csv", to_csv(external_factors));
  chord("chord_items_external", external.rows());
  chord("chord_items_internal", internal.rows());
  chord("chord_factors_external", external_factors.rows());

  const auto segmented = stage("segmentation", [&] {
    SegmentOptions so;
    so.min_size = cfg.segment_min_size;
    so.mtry_by_target = external_mtry;
    so.workers = workers;
    const Dataset labeled = label_adoption(screened, schema.adoption_item());
    return segment_importance(labeled, schema, cfg.forest, derive_seed(cfg.seed, {0x5e6}), so);
  });
  const auto adopter_factors = stage("segmentation", [&] { return aggregate_factors(segmented.adopter, schema); });
  const auto non_adopter_factors =
      stage("segmentation", [&] { return aggregate_factors(segmented.non_adopter, schema); });
  out.write("tables/importance_adopter.csv", to_csv(segmented.adopter));
  out.write("tables/importance_non_adopter.csv", to_csv(segmented.non_adopter));
  out.write("tables/factor_importance_adopter.csv", to_csv(adopter_factors));
  out.write("tables/factor_importance_non_adopter.csv", to_csv(non_adopter_factors));
  {
    ordered_json sj;
    sj["n_adopter"] = segmented.n_adopter;
    sj["n_non_adopter"] = segmented.n_non_adopter;
    out.write("reports/segmentation.json", sj.dump(2) + "\n");
  }
  chord("chord_factors_adopter", adopter_factors.rows());
  chord("chord_factors_non_adopter", non_adopter_factors.rows());

  stage("stats", [&] {
    std::vector<std::string> compared;
    for (const auto& c : items)
      if (c != schema.cohort_column()) compared.push_back(c);
    if (!schema.cohort_column().empty())
      out.write("tables/utest.csv", utest_csv(utest_by_cohort(screened, compared)));

    std::vector<std::string> corr_cols = schema.auxiliary_columns();
    for (const auto* f : schema.target_factors()) corr_cols.push_back(f->overall_item);
    out.write("tables/correlation.csv", correlation_csv(pearson_matrix(screened, corr_cols)));

    std::vector<ColumnSummary> summaries;
    for (const auto& c : schema.response_columns()) summaries.push_back(describe(screened, c));
    out.write("reports/describe.json", describe_json(summaries));
    return 0;
  });

  ordered_json manifest;
  manifest["format"] = "tamrf-manifest/1";
  manifest["config_sha256"] = result.config_sha256;
  manifest["seed"] = cfg.seed;
  manifest["artifacts"] = out.checksums();
  io::write_text_file(result.output_dir / "manifest.json", manifest.dump(2) + "\n");
  result.checksums = out.checksums();
  return result;
}

}  // namespace tamrf
