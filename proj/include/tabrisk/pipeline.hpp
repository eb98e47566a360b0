#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tabrisk/forest.hpp"
#include "tabrisk/metrics.hpp"
#include "tabrisk/tabular.hpp"
#include "tabrisk/tuning.hpp"

namespace tabrisk::pipeline {

inline constexpr std::string_view kVersion = "0.1.0";

// default: preprocessing and selection are fitted on the training split only.
// fit_before_split (config token "paper-order") reproduces the originally
// published sequence, fitting them on all retained rows before the split.
enum class StageOrder { train_only, fit_before_split };

std::string to_string(StageOrder order);
StageOrder stage_order_from_string(std::string_view text);

struct PipelineConfig {
  std::filesystem::path input_csv;
  std::filesystem::path schema_file;
  std::filesystem::path output_dir;
  std::uint64_t seed = 42;
  double train_fraction = 0.8;
  StageOrder order = StageOrder::train_only;
  int threads = 1;

  // Stage toggles; the forest itself always runs.
  bool lasso = true;
  bool rfe = true;
  bool smote = true;
  bool grid_search = true;
  bool explain = true;

  std::optional<double> lambda;  // empty = choose by cross-validation
  int lambda_grid_points = 20;
  int lasso_max_iter = 50000;
  double lasso_tol = 1e-8;

  int rfe_target = 10;
  int rfe_step = 1;

  int cv_folds = 5;
  tuning::CvMetric cv_metric = tuning::CvMetric::accuracy;

  int smote_k = 5;
  double smote_ratio = 1.0;
  bool smote_audit = false;

  // Fixed model when grid_search is off; also the base (seed, threads) every
  // grid cell inherits. The pipeline overrides its seed and thread count.
  forest::ForestConfig forest_cfg{};
  tuning::GridSpec grid{};

  int shap_instances = 5;
  int shap_background = 100;
  int shap_permutations = 200;

  void validate() const;  // throws ConfigError on out-of-range fields
};

// Text format: one "key value" line per setting; blank lines and lines
// starting with '#' are ignored; unknown or repeated keys are errors. Keys
// omitted from the input keep their defaults. serialize_pipeline_config emits
// every key in a fixed order with canonical number formatting, so
// serialize(parse(text)) is a fixed point byte for byte.
PipelineConfig parse_pipeline_config(const std::string& text);
PipelineConfig read_pipeline_config(const std::filesystem::path& path);
std::string serialize_pipeline_config(const PipelineConfig& cfg);

// Everything needed to score fresh CSV rows: the fitted preprocessor, the
// label column, the surviving design-column indices, and the forest.
struct ModelBundle {
  tabular::FittedPreprocessor preprocessor;
  std::string label_column;
  std::vector<std::size_t> selected_columns;
  forest::ForestModel model;
};

void write_bundle(std::ostream& out, const ModelBundle& bundle);
ModelBundle read_bundle(std::istream& in);

struct PipelineResult {
  std::filesystem::path run_dir;
  metrics::EvalReport report;
  std::vector<std::int64_t> test_row_ids;
  std::vector<std::size_t> selected_columns;   // design-matrix indices
  std::vector<std::string> selected_names;
  std::optional<tuning::CVResult> cv;
  std::vector<std::string> warnings;
  std::string manifest_json;
};

// Runs the enabled stages in order (load, exclude, split, preprocess, lasso,
// rfe, smote, grid_search, train, evaluate, explain) inside cfg.output_dir,
// which is locked by a .lock file for the duration. Always writes
// model.bundle, eval_report.json, roc_points.csv and manifest.json; enabled
// stages add selection.txt, cv_results.csv, smote_audit.csv (opt-in),
// shap_values.csv and shap_summary.json. The manifest lists every other
// emitted file with its content hash. On a stage failure a partial manifest
// naming the failed stage is written and the error is rethrown with the
// stage name prefixed.
PipelineResult run_pipeline(const PipelineConfig& cfg);

struct AblationRow {
  std::string label;
  metrics::ClassificationMetrics metrics;
  double auc = 0.0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<PipelineResult> runs;
};

// Four runs on one shared split and seed: a plain forest, then SMOTE, LASSO
// and grid search added cumulatively (each alone when independent is true).
// Recursive feature elimination and the explanation stage stay off so the
// rows isolate the three toggles. Writes ablation.csv plus one run_<i>_*
// subdirectory per row under cfg.output_dir.
AblationResult run_ablation(const PipelineConfig& cfg, bool independent = false);

void write_ablation_csv(std::ostream& out, const AblationResult& result);

}  // namespace tabrisk::pipeline
