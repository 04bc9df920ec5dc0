// tamrf: random-forest analysis of technology-acceptance surveys.
//
// Every subcommand reads and writes the library's file formats, so stages can
// be scripted individually; `run` executes the whole pipeline from a JSON
// config. Exit status: 0 ok, 2 config error, 3 data error, 4 model error.

#include "tamrf/chord.hpp"
#include "tamrf/error.hpp"
#include "tamrf/evaluate.hpp"
#include "tamrf/explain.hpp"
#include "tamrf/forest.hpp"
#include "tamrf/importance.hpp"
#include "tamrf/io.hpp"
#include "tamrf/pipeline.hpp"
#include "tamrf/schema.hpp"
#include "tamrf/stats.hpp"
#include "tamrf/synthetic.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace {

using namespace tamrf;

void emit(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-")
    std::cout << content;
  else
    io::write_text_file(path, content);
}

Forest load_model(const std::string& path) { return forest_from_json(io::read_text_file(path)); }

std::size_t default_workers() {
  const auto hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : hc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tamrf: random forests, importance chord diagrams and survey statistics"};
  app.require_subcommand(1);
  app.footer(
      "Environment: TAMRF_WORKERS sets the default worker count, TAMRF_SEED the default seed.\n"
      "Exit codes: 0 success, 2 config error, 3 data error, 4 model error.");

  std::size_t workers = default_workers();
  std::uint64_t seed = 0;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Parse and screen a response CSV");
  std::string schema_path, data_path, out_path, report_path;
  double max_na = 0.2;
  bool complete = false;
  ingest->add_option("--schema", schema_path, "Schema config")->required()->check(CLI::ExistingFile);
  ingest->add_option("--data", data_path, "Response CSV")->required()->check(CLI::ExistingFile);
  ingest->add_option("--max-na", max_na, "Exclude rows with more than this missing fraction")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  ingest->add_flag("--complete-cases", complete, "Also drop rows with any missing item");
  ingest->add_option("--report", report_path, "Screening report JSON");
  ingest->add_option("-o,--out", out_path, "Cleaned CSV (default stdout)");

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic survey");
  SyntheticSpec spec;
  bool no_signal = false;
  synth->add_option("--schema", schema_path, "Schema config")->required()->check(CLI::ExistingFile);
  synth->add_option("--seed", seed, "Master seed")->envname("TAMRF_SEED");
  synth->add_option("-n", spec.n, "Respondents")->capture_default_str();
  synth->add_option("--adopter-fraction", spec.adopter_fraction)->capture_default_str();
  synth->add_option("--latent-sd", spec.latent_sd)->capture_default_str();
  synth->add_option("--noise-sd", spec.noise_sd)->capture_default_str();
  synth->add_option("--missing-rate", spec.missing_rate)->capture_default_str();
  synth->add_option("--cohort-split", spec.cohort_split)->capture_default_str();
  synth->add_flag("--no-signal", no_signal, "Items i.i.d. uniform over the response grid");
  synth->add_option("-o,--out", out_path, "Output CSV (default stdout)");

  // fit
  auto* fit = app.add_subcommand("fit", "Fit a random forest for one target");
  std::string target, model_class = "external";
  std::vector<std::string> predictors;
  ForestConfig fcfg;
  std::size_t max_depth = 0;
  fit->add_option("--schema", schema_path, "Schema config")->required()->check(CLI::ExistingFile);
  fit->add_option("--data", data_path, "Training CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--target", target, "Target item")->required();
  fit->add_option("--predictors", predictors, "Predictor items (default: schema model class)")->delimiter(',');
  fit->add_option("--class", model_class, "external or internal")->capture_default_str();
  fit->add_option("--trees", fcfg.n_trees)->capture_default_str();
  fit->add_option("--mtry", fcfg.mtry, "0 selects max(1, p/3)")->capture_default_str();
  fit->add_option("--min-node-size", fcfg.min_node_size)->capture_default_str();
  fit->add_option("--max-depth", max_depth, "0 for unlimited")->capture_default_str();
  fit->add_option("--seed", seed, "Master seed")->envname("TAMRF_SEED");
  fit->add_option("--workers", workers)->envname("TAMRF_WORKERS");
  fit->add_option("-o,--out", out_path, "Model JSON (default stdout)");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "Score a model on train/test data against random baselines");
  std::string model_path, train_path, test_path, accuracy_path;
  double step = 5.0;
  std::size_t baseline_samples = 100;
  evaluate->add_option("--schema", schema_path, "Schema config")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--train", train_path, "Training CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--test", test_path, "Held-out CSV")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--class", model_class)->capture_default_str();
  evaluate->add_option("--threshold-step", step)->capture_default_str();
  evaluate->add_option("--baseline-samples", baseline_samples)->capture_default_str();
  evaluate->add_option("--seed", seed, "Baseline seed")->envname("TAMRF_SEED");
  evaluate->add_option("--workers", workers)->envname("TAMRF_WORKERS");
  evaluate->add_option("--accuracy-csv", accuracy_path, "Accuracy vs baseline table");
  evaluate->add_option("-o,--out", out_path, "Report JSON (default stdout)");

  // importance
  auto* importance = app.add_subcommand("importance", "Relative importance table from fitted models");
  std::vector<std::string> model_paths;
  bool factors = false;
  std::optional<int> decimals;
  importance->add_option("--model", model_paths, "Model JSON, one per target")->required()->check(CLI::ExistingFile);
  importance->add_option("--schema", schema_path, "Schema config (needed with --factors)")->check(CLI::ExistingFile);
  importance->add_flag("--factors", factors, "Aggregate items into factors");
  importance->add_option("--decimals", decimals, "Round weights for presentation");
  importance->add_option("-o,--out", out_path, "Importance CSV (default stdout)");

  // chord
  auto* chord = app.add_subcommand("chord", "Render an importance table as a chord diagram");
  std::string table_path, layout_path, labels = "code";
  LayoutOptions lopts;
  SvgStyle style;
  chord->add_option("--table", table_path, "Importance CSV")->required()->check(CLI::ExistingFile);
  chord->add_option("--schema", schema_path, "Schema config")->required()->check(CLI::ExistingFile);
  chord->add_option("--gap", lopts.gap_degrees, "Degrees between nodes")->capture_default_str();
  chord->add_option("--group-gap", lopts.group_gap_degrees, "Degrees between factor families")->capture_default_str();
  chord->add_option("--min-render-weight", lopts.min_render_weight)->capture_default_str();
  chord->add_option("--start-angle", lopts.start_angle)->capture_default_str();
  chord->add_option("--sum-tolerance", lopts.sum_tolerance, "Allowed |sum - 100| per target")->capture_default_str();
  chord->add_option("--size", style.size_px, "Pixels")->capture_default_str();
  chord->add_option("--labels", labels, "none, code or label")
      ->check(CLI::IsMember({"none", "code", "label"}))
      ->capture_default_str();
  chord->add_option("--layout-json", layout_path, "Also write the resolved layout");
  chord->add_option("-o,--out", out_path, "SVG (default stdout)");

  // stats
  auto* stats = app.add_subcommand("stats", "Mann-Whitney U, correlations, descriptive summaries");
  stats->require_subcommand(1);
  std::vector<std::string> columns;
  double alpha = 0.05;
  std::size_t exact_cutoff = 30;
  bool no_correction = false;
  auto add_common = [&](CLI::App* sc) {
    sc->add_option("--schema", schema_path, "Schema config")->required()->check(CLI::ExistingFile);
    sc->add_option("--data", data_path, "Response CSV")->required()->check(CLI::ExistingFile);
    sc->add_option("--columns", columns, "Columns (default: per command)")->delimiter(',');
    sc->add_option("-o,--out", out_path, "Output (default stdout)");
  };
  auto* utest = stats->add_subcommand("utest", "Control vs PsychOwnership per item");
  add_common(utest);
  utest->add_option("--alpha", alpha)->capture_default_str();
  utest->add_option("--exact-cutoff", exact_cutoff)->capture_default_str();
  utest->add_flag("--no-continuity-correction", no_correction);
  auto* corr = stats->add_subcommand("corr", "Pairwise-complete Pearson matrix");
  add_common(corr);
  auto* desc = stats->add_subcommand("describe", "Moments and histograms");
  add_common(desc);

  // pd
  auto* pd = app.add_subcommand("pd", "Partial dependence of a model on one feature");
  std::string feature;
  std::optional<std::size_t> tree_index;
  pd->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  pd->add_option("--schema", schema_path, "Schema config")->required()->check(CLI::ExistingFile);
  pd->add_option("--data", data_path, "Rows to average over")->required()->check(CLI::ExistingFile);
  pd->add_option("--feature", feature)->required();
  pd->add_option("--tree", tree_index, "Single tree instead of the forest");
  pd->add_option("--workers", workers)->envname("TAMRF_WORKERS");
  pd->add_option("-o,--out", out_path, "CSV (default stdout)");

  // tree
  auto* tree = app.add_subcommand("tree", "Export one tree of a model");
  std::string format = "text";
  std::size_t index = 0;
  tree->add_option("--model", model_path, "Model JSON")->required()->check(CLI::ExistingFile);
  tree->add_option("--index", index)->capture_default_str();
  tree->add_option("--format", format)->check(CLI::IsMember({"text", "dot"}))->capture_default_str();
  tree->add_option("-o,--out", out_path, "Output (default stdout)");

  // run
  auto* run = app.add_subcommand("run", "Full pipeline from a JSON run config");
  std::string config_path, output_dir;
  run->add_option("--config", config_path, "Run config JSON")->required();
  run->add_option("--workers", workers, "Worker threads; results do not depend on it")->envname("TAMRF_WORKERS");
  run->add_option("--output-dir", output_dir, "Override output_dir")->envname("TAMRF_OUTPUT_DIR");

  CLI11_PARSE(app, argc, argv);
  if (workers == 0) workers = 1;

  try {
    if (*ingest) {
      const auto schema = load_schema(schema_path);
      auto [ds, report] = screen(parse_responses(std::filesystem::path(data_path), schema), schema, max_na);
      if (complete) ds = complete_cases(ds, schema.item_columns());
      if (!report_path.empty()) io::write_text_file(report_path, to_json(report));
      emit(out_path, to_csv(ds, schema));
      std::cerr << fmt::format("{} rows in, {} excluded, {} written\n", report.n_input, report.n_excluded_na,
                               ds.rows());
    } else if (*synth) {
      const auto schema = load_schema(schema_path);
      spec.signal = !no_signal;
      spec.validate();
      emit(out_path, to_csv(generate_synthetic(spec, schema, seed), schema));
    } else if (*fit) {
      const auto schema = load_schema(schema_path);
      const Dataset data = parse_responses(std::filesystem::path(data_path), schema);
      if (predictors.empty()) {
        const auto* f = schema.factor_of(target);
        if (!f) throw ConfigError(fmt::format("target '{}' is not a schema item", target));
        predictors = model_class_from_string(model_class) == ModelClass::External
                         ? schema.external_predictors(f->code)
                         : schema.internal_predictors(f->code);
      }
      if (max_depth > 0) fcfg.max_depth = max_depth;
      fcfg.seed = seed;
      std::vector<std::string> cols = predictors;
      cols.push_back(target);
      emit(out_path, to_json(fit_forest(complete_cases(data, cols), target, predictors, fcfg, workers)));
    } else if (*evaluate) {
      const auto schema = load_schema(schema_path);
      const Forest f = load_model(model_path);
      std::vector<std::string> cols = f.predictors();
      cols.push_back(f.target());
      const auto train = complete_cases(parse_responses(std::filesystem::path(train_path), schema), cols);
      const auto test = complete_cases(parse_responses(std::filesystem::path(test_path), schema), cols);
      const auto thresholds = threshold_grid(step);
      const auto report = evaluate_model(f, train, test, model_class_from_string(model_class), thresholds);
      const auto baseline = random_baseline(report.y_test, baseline_samples, thresholds, seed, workers);
      if (!accuracy_path.empty()) io::write_text_file(accuracy_path, accuracy_csv(report.accuracy_at, baseline));
      emit(out_path, to_json(report));
    } else if (*importance) {
      std::map<std::string, Forest> models;
      for (const auto& p : model_paths) {
        Forest f = load_model(p);
        const std::string t = f.target();
        if (!models.emplace(t, std::move(f)).second)
          throw ConfigError(fmt::format("two models share target '{}'", t));
      }
      const auto table = build_importance_table(models);
      if (factors) {
        if (schema_path.empty()) throw ConfigError("--factors needs --schema");
        emit(out_path, to_csv(aggregate_factors(table, load_schema(schema_path)), decimals));
      } else {
        emit(out_path, to_csv(table, decimals));
      }
    } else if (*chord) {
      const auto schema = load_schema(schema_path);
      style.labels = labels == "none" ? LabelMode::None : labels == "label" ? LabelMode::Label : LabelMode::Code;
      const auto l = layout(read_weight_rows(io::read_text_file(table_path)), schema, lopts);
      if (!layout_path.empty()) io::write_text_file(layout_path, layout_json(l));
      emit(out_path, render_svg(l, style));
    } else if (*stats) {
      const auto schema = load_schema(schema_path);
      const Dataset data = parse_responses(std::filesystem::path(data_path), schema);
      if (*utest) {
        if (columns.empty())
          for (const auto& c : schema.item_columns())
            if (c != schema.cohort_column()) columns.push_back(c);
        UTestOptions o;
        o.exact_cutoff = exact_cutoff;
        o.continuity_correction = !no_correction;
        emit(out_path, utest_csv(utest_by_cohort(data, columns, alpha, o)));
      } else if (*corr) {
        if (columns.empty()) columns = schema.auxiliary_columns();
        emit(out_path, correlation_csv(pearson_matrix(data, columns)));
      } else {
        if (columns.empty()) columns = schema.response_columns();
        std::vector<ColumnSummary> s;
        for (const auto& c : columns) s.push_back(describe(data, c));
        emit(out_path, describe_json(s));
      }
    } else if (*pd) {
      const auto schema = load_schema(schema_path);
      const Forest f = load_model(model_path);
      const auto data = complete_cases(parse_responses(std::filesystem::path(data_path), schema), f.predictors());
      const auto grid = default_pd_grid(data.column(feature));
      if (tree_index) {
        if (*tree_index >= f.trees().size()) throw ConfigError("--tree index out of range");
        emit(out_path, to_csv(partial_dependence_tree(f, *tree_index, data.matrix(f.predictors()), feature, grid)));
      } else {
        emit(out_path, to_csv(partial_dependence(f, data, feature, grid, workers)));
      }
    } else if (*tree) {
      const Forest f = load_model(model_path);
      if (index >= f.trees().size()) throw ConfigError("--index out of range");
      const auto& t = f.trees()[index];
      emit(out_path, format == "dot" ? export_tree_dot(t, f.predictors()) : export_tree_text(t, f.predictors()));
    } else if (*run) {
      RunConfig cfg = load_run_config(config_path);
      if (!output_dir.empty()) cfg.output_dir = std::filesystem::absolute(output_dir);
      const auto result = run_pipeline(cfg, workers);
      std::cerr << fmt::format("wrote {} artifacts to {}\n", result.checksums.size() + 1,
                               result.output_dir.string());
    }
  } catch (const tamrf::Error& e) {
    std::cerr << "tamrf: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "tamrf: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
