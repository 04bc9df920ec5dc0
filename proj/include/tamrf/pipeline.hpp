#pragma once

#include "tamrf/chord.hpp"
#include "tamrf/forest.hpp"
#include "tamrf/synthetic.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tamrf {

/// Everything a full run needs. Relative paths resolve against base_dir (the
/// config file's directory when loaded from disk).
struct RunConfig {
  std::filesystem::path base_dir = ".";
  std::filesystem::path schema;
  /// Response CSV; when empty, `synthetic` generates the data.
  std::filesystem::path data;
  std::optional<SyntheticSpec> synthetic;
  std::uint64_t seed = 0;
  double screening_threshold = 0.2;
  double train_fraction = 0.8;
  /// Empty: default grid per model.
  std::vector<std::size_t> mtry_grid;
  std::size_t folds = 10;
  ForestConfig forest;
  /// Trees per forest inside cross validation (0: forest.n_trees).
  std::size_t cv_trees = 0;
  double threshold_step = 5.0;
  std::size_t baseline_samples = 100;
  std::size_t segment_min_size = 20;
  LayoutOptions chord_layout;
  SvgStyle chord_style;
  std::filesystem::path output_dir = "out";

  std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// Parses the JSON run config (see README "Run configuration"). `seed` is
/// mandatory.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir = ".");
RunConfig load_run_config(const std::filesystem::path& path);
/// Canonical JSON of the settings that influence results (no output_dir).
std::string canonical_config_json(const RunConfig& cfg);

struct RunResult {
  std::filesystem::path output_dir;
  /// Relative path -> SHA-256 of every artifact written.
  std::map<std::string, std::string> checksums;
  std::string config_sha256;
};

/// screen -> complete cases -> split -> CV + fit + evaluate per target and
/// class -> importance tables (external, internal, factor, segmented) ->
/// chord SVGs -> statistics -> manifest.json. Writes reports/, tables/,
/// figures/ and manifest.json under cfg.output_dir. Inputs are validated
/// before anything is written; stage failures rethrow with a "[stage]" prefix.
RunResult run_pipeline(const RunConfig& cfg, std::size_t workers = 1);

}  // namespace tamrf
