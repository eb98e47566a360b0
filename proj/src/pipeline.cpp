#include "tabrisk/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "tabrisk/explain.hpp"
#include "tabrisk/resample.hpp"
#include "tabrisk/rng.hpp"
#include "tabrisk/selection.hpp"

namespace fs = std::filesystem;

namespace tabrisk::pipeline {

namespace {

constexpr int kShapExactLimit = 15;

bool parse_on_off(std::string_view text, const std::string& key) {
  if (text == "on") return true;
  if (text == "off") return false;
  throw ConfigError("config key '" + key + "' expects 'on' or 'off', got '" +
                    std::string(text) + "'");
}

const char* on_off(bool value) { return value ? "on" : "off"; }

int parse_bounded_int(std::string_view text, const std::string& key) {
  const long long v = parse_int(text, "config key '" + key + "'");
  if (v < INT32_MIN || v > INT32_MAX) {
    throw ConfigError("config key '" + key + "' is out of range");
  }
  return static_cast<int>(v);
}

std::vector<int> parse_int_list(std::string_view text, const std::string& key) {
  std::vector<int> values;
  for (const auto& token : split(text, ',')) {
    values.push_back(parse_bounded_int(trim(token), key));
  }
  if (values.empty()) {
    throw ConfigError("config key '" + key + "' expects a comma-separated list");
  }
  return values;
}

std::string join_ints(const std::vector<int>& values) {
  std::vector<std::string> parts;
  parts.reserve(values.size());
  for (int v : values) parts.push_back(std::to_string(v));
  return join(parts, ",");
}

std::vector<forest::FeatureSubset> parse_subset_list(std::string_view text,
                                                     const std::string& key) {
  std::vector<forest::FeatureSubset> values;
  for (const auto& token : split(text, ',')) {
    values.push_back(forest::feature_subset_from_string(trim(token)));
  }
  if (values.empty()) {
    throw ConfigError("config key '" + key + "' expects a comma-separated list");
  }
  return values;
}

std::string join_subsets(const std::vector<forest::FeatureSubset>& values) {
  std::vector<std::string> parts;
  parts.reserve(values.size());
  for (const auto& v : values) parts.push_back(forest::to_string(v));
  return join(parts, ",");
}

// Rethrows the in-flight exception with the stage name attached, preserving
// the error category (and therefore the CLI exit code) for config and data
// causes; anything else becomes a stage failure.
[[noreturn]] void rethrow_in_stage(const std::string& stage) {
  try {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const ConfigError& e) {
    throw ConfigError("stage '" + stage + "': " + e.what());
  } catch (const DataError& e) {
    throw DataError("stage '" + stage + "': " + e.what());
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

// Removes the run directory's .lock unless told the run completed its own
// cleanup; keeps the lock release exception-safe.
class LockGuard {
 public:
  explicit LockGuard(fs::path path) : path_(std::move(path)) {}
  ~LockGuard() {
    if (!released_) release();
  }
  void release() {
    released_ = true;
    std::error_code ec;
    fs::remove(path_, ec);
  }

 private:
  fs::path path_;
  bool released_ = false;
};

forest::ForestConfig base_forest_config(const PipelineConfig& cfg) {
  forest::ForestConfig base = cfg.forest_cfg;
  base.seed = 0;  // every use derives its own stream from the pipeline seed
  base.n_threads = cfg.threads;
  return base;
}

std::vector<std::size_t> identity_columns(std::size_t width) {
  std::vector<std::size_t> all(width);
  for (std::size_t j = 0; j < width; ++j) all[j] = j;
  return all;
}

}  // namespace

std::string to_string(StageOrder order) {
  return order == StageOrder::fit_before_split ? "paper-order" : "default";
}

StageOrder stage_order_from_string(std::string_view text) {
  if (text == "default") return StageOrder::train_only;
  if (text == "paper-order") return StageOrder::fit_before_split;
  throw ConfigError("order must be 'default' or 'paper-order', got '" +
                    std::string(text) + "'");
}

void PipelineConfig::validate() const {
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0)) {
    throw ConfigError("train_fraction must lie strictly between 0 and 1");
  }
  if (threads < 0) throw ConfigError("threads must be >= 0 (0 = all cores)");
  if (lambda.has_value() && (!std::isfinite(*lambda) || *lambda < 0.0)) {
    throw ConfigError("lambda must be a finite value >= 0, or 'auto'");
  }
  if (lambda_grid_points < 2) throw ConfigError("lambda_grid_points must be >= 2");
  if (lasso_max_iter < 1) throw ConfigError("lasso_max_iter must be >= 1");
  if (!(lasso_tol > 0.0) || !std::isfinite(lasso_tol)) {
    throw ConfigError("lasso_tol must be a positive finite value");
  }
  if (rfe_target < 1) throw ConfigError("rfe_target must be >= 1");
  if (rfe_step < 1) throw ConfigError("rfe_step must be >= 1");
  if (cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
  if (smote_k < 1) throw ConfigError("smote_k must be >= 1");
  if (!(smote_ratio > 0.0) || !(smote_ratio <= 1.0)) {
    throw ConfigError("smote_ratio must lie in (0, 1]");
  }
  if (shap_instances < 1) throw ConfigError("shap_instances must be >= 1");
  if (shap_background < 1) throw ConfigError("shap_background must be >= 1");
  if (shap_permutations < 1) throw ConfigError("shap_permutations must be >= 1");
  forest_cfg.validate();
  grid.validate();
}

PipelineConfig parse_pipeline_config(const std::string& text) {
  PipelineConfig cfg;
  std::map<std::string, bool> seen;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const auto space = stripped.find(' ');
    const std::string key = stripped.substr(0, space);
    const std::string value =
        space == std::string::npos ? "" : trim(stripped.substr(space + 1));
    if (seen[key]) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": duplicate key '" + key + "'");
    }
    seen[key] = true;

    try {
      if (key == "input_csv") {
        cfg.input_csv = value;
      } else if (key == "schema_file") {
        cfg.schema_file = value;
      } else if (key == "output_dir") {
        cfg.output_dir = value;
      } else if (key == "seed") {
        cfg.seed = parse_uint64(value, "config key 'seed'");
      } else if (key == "train_fraction") {
        cfg.train_fraction = parse_double(value, "config key 'train_fraction'");
      } else if (key == "order") {
        cfg.order = stage_order_from_string(value);
      } else if (key == "threads") {
        cfg.threads = parse_bounded_int(value, key);
      } else if (key == "lasso") {
        cfg.lasso = parse_on_off(value, key);
      } else if (key == "rfe") {
        cfg.rfe = parse_on_off(value, key);
      } else if (key == "smote") {
        cfg.smote = parse_on_off(value, key);
      } else if (key == "grid_search") {
        cfg.grid_search = parse_on_off(value, key);
      } else if (key == "explain") {
        cfg.explain = parse_on_off(value, key);
      } else if (key == "lambda") {
        if (value == "auto") {
          cfg.lambda.reset();
        } else {
          cfg.lambda = parse_double(value, "config key 'lambda'");
        }
      } else if (key == "lambda_grid_points") {
        cfg.lambda_grid_points = parse_bounded_int(value, key);
      } else if (key == "lasso_max_iter") {
        cfg.lasso_max_iter = parse_bounded_int(value, key);
      } else if (key == "lasso_tol") {
        cfg.lasso_tol = parse_double(value, "config key 'lasso_tol'");
      } else if (key == "rfe_target") {
        cfg.rfe_target = parse_bounded_int(value, key);
      } else if (key == "rfe_step") {
        cfg.rfe_step = parse_bounded_int(value, key);
      } else if (key == "cv_folds") {
        cfg.cv_folds = parse_bounded_int(value, key);
      } else if (key == "cv_metric") {
        cfg.cv_metric = tuning::cv_metric_from_string(value);
      } else if (key == "smote_k") {
        cfg.smote_k = parse_bounded_int(value, key);
      } else if (key == "smote_ratio") {
        cfg.smote_ratio = parse_double(value, "config key 'smote_ratio'");
      } else if (key == "smote_audit") {
        cfg.smote_audit = parse_on_off(value, key);
      } else if (key == "n_trees") {
        cfg.forest_cfg.n_trees = parse_bounded_int(value, key);
      } else if (key == "max_depth") {
        cfg.forest_cfg.max_depth = parse_bounded_int(value, key);
      } else if (key == "min_samples_split") {
        cfg.forest_cfg.min_samples_split = parse_bounded_int(value, key);
      } else if (key == "min_samples_leaf") {
        cfg.forest_cfg.min_samples_leaf = parse_bounded_int(value, key);
      } else if (key == "features_per_split") {
        cfg.forest_cfg.features_per_split = forest::feature_subset_from_string(value);
      } else if (key == "grid_n_trees") {
        cfg.grid.n_trees = parse_int_list(value, key);
      } else if (key == "grid_max_depth") {
        cfg.grid.max_depth = parse_int_list(value, key);
      } else if (key == "grid_min_samples_split") {
        cfg.grid.min_samples_split = parse_int_list(value, key);
      } else if (key == "grid_features_per_split") {
        cfg.grid.features_per_split = parse_subset_list(value, key);
      } else if (key == "shap_instances") {
        cfg.shap_instances = parse_bounded_int(value, key);
      } else if (key == "shap_background") {
        cfg.shap_background = parse_bounded_int(value, key);
      } else if (key == "shap_permutations") {
        cfg.shap_permutations = parse_bounded_int(value, key);
      } else {
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": unknown key '" + key + "'");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const DataError& e) {
      // Number and list parsing reports a data error; inside a config file
      // that is a configuration mistake and must exit as one.
      throw ConfigError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

PipelineConfig read_pipeline_config(const fs::path& path) {
  return parse_pipeline_config(read_file(path));
}

std::string serialize_pipeline_config(const PipelineConfig& cfg) {
  std::ostringstream out;
  auto emit = [&out](const std::string& key, const std::string& value) {
    out << key;
    if (!value.empty()) out << ' ' << value;
    out << '\n';
  };
  emit("input_csv", cfg.input_csv.string());
  emit("schema_file", cfg.schema_file.string());
  emit("output_dir", cfg.output_dir.string());
  emit("seed", std::to_string(cfg.seed));
  emit("train_fraction", format_double(cfg.train_fraction));
  emit("order", to_string(cfg.order));
  emit("threads", std::to_string(cfg.threads));
  emit("lasso", on_off(cfg.lasso));
  emit("rfe", on_off(cfg.rfe));
  emit("smote", on_off(cfg.smote));
  emit("grid_search", on_off(cfg.grid_search));
  emit("explain", on_off(cfg.explain));
  emit("lambda", cfg.lambda.has_value() ? format_double(*cfg.lambda) : "auto");
  emit("lambda_grid_points", std::to_string(cfg.lambda_grid_points));
  emit("lasso_max_iter", std::to_string(cfg.lasso_max_iter));
  emit("lasso_tol", format_double(cfg.lasso_tol));
  emit("rfe_target", std::to_string(cfg.rfe_target));
  emit("rfe_step", std::to_string(cfg.rfe_step));
  emit("cv_folds", std::to_string(cfg.cv_folds));
  emit("cv_metric", tuning::to_string(cfg.cv_metric));
  emit("smote_k", std::to_string(cfg.smote_k));
  emit("smote_ratio", format_double(cfg.smote_ratio));
  emit("smote_audit", on_off(cfg.smote_audit));
  emit("n_trees", std::to_string(cfg.forest_cfg.n_trees));
  emit("max_depth", std::to_string(cfg.forest_cfg.max_depth));
  emit("min_samples_split", std::to_string(cfg.forest_cfg.min_samples_split));
  emit("min_samples_leaf", std::to_string(cfg.forest_cfg.min_samples_leaf));
  emit("features_per_split", forest::to_string(cfg.forest_cfg.features_per_split));
  emit("grid_n_trees", join_ints(cfg.grid.n_trees));
  emit("grid_max_depth", join_ints(cfg.grid.max_depth));
  emit("grid_min_samples_split", join_ints(cfg.grid.min_samples_split));
  emit("grid_features_per_split", join_subsets(cfg.grid.features_per_split));
  emit("shap_instances", std::to_string(cfg.shap_instances));
  emit("shap_background", std::to_string(cfg.shap_background));
  emit("shap_permutations", std::to_string(cfg.shap_permutations));
  return out.str();
}

void write_bundle(std::ostream& out, const ModelBundle& bundle) {
  out << "tabrisk_bundle 1\n";
  out << "label " << bundle.label_column << '\n';
  out << "preprocessor\n";
  tabular::write_preprocessor(out, bundle.preprocessor);
  out << "selected " << bundle.selected_columns.size() << '\n';
  for (std::size_t j = 0; j < bundle.selected_columns.size(); ++j) {
    if (j > 0) out << ' ';
    out << bundle.selected_columns[j];
  }
  out << '\n';
  out << "forest\n";
  forest::write_forest(out, bundle.model);
}

namespace {

std::string bundle_line(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("model bundle: unexpected end of input, expected '" + key + "'");
  }
  if (line.rfind(key, 0) != 0) {
    throw DataError("model bundle: expected '" + key + "', got '" + line + "'");
  }
  if (line.size() == key.size()) return "";
  return line.substr(key.size() + 1);
}

}  // namespace

ModelBundle read_bundle(std::istream& in) {
  ModelBundle bundle;
  if (bundle_line(in, "tabrisk_bundle") != "1") {
    throw DataError("model bundle: unsupported format version");
  }
  bundle.label_column = bundle_line(in, "label");
  bundle_line(in, "preprocessor");
  bundle.preprocessor = tabular::read_preprocessor(in);
  const auto n_selected = static_cast<std::size_t>(
      parse_int(bundle_line(in, "selected"), "model bundle"));
  if (n_selected > 0) {
    std::string line;
    if (!std::getline(in, line)) {
      throw DataError("model bundle: missing selected column indices");
    }
    const auto tokens = split(trim(line), ' ');
    if (tokens.size() != n_selected) {
      throw DataError("model bundle: selected column count mismatch");
    }
    for (const auto& token : tokens) {
      bundle.selected_columns.push_back(
          static_cast<std::size_t>(parse_int(token, "model bundle")));
    }
  }
  bundle_line(in, "forest");
  bundle.model = forest::read_forest(in);
  return bundle;
}

PipelineResult run_pipeline(const PipelineConfig& cfg) {
  cfg.validate();
  if (cfg.input_csv.empty()) throw ConfigError("pipeline requires input_csv");
  if (cfg.schema_file.empty()) throw ConfigError("pipeline requires schema_file");
  if (cfg.output_dir.empty()) throw ConfigError("pipeline requires output_dir");

  fs::create_directories(cfg.output_dir);
  const fs::path lock_path = cfg.output_dir / ".lock";
  if (fs::exists(lock_path)) {
    throw ConfigError("run directory '" + cfg.output_dir.string() +
                      "' is locked by another run (remove .lock if stale)");
  }
  write_file(lock_path, "tabrisk run in progress\n");
  LockGuard lock(lock_path);

  PipelineResult result;
  result.run_dir = cfg.output_dir;

  std::vector<std::string> stages_run;
  std::map<std::string, std::string> file_hashes;  // name -> content hash
  auto emit_file = [&](const std::string& name, const std::string& content) {
    write_file(cfg.output_dir / name, content);
    file_hashes[name] = fnv1a64_hex(content);
  };

  nlohmann::json manifest;
  manifest["version"] = std::string(kVersion);
  manifest["seed"] = cfg.seed;
  manifest["config"] = serialize_pipeline_config(cfg);
  manifest["toggles"] = {{"lasso", cfg.lasso},
                         {"rfe", cfg.rfe},
                         {"smote", cfg.smote},
                         {"grid_search", cfg.grid_search},
                         {"explain", cfg.explain}};

  auto write_manifest = [&](bool partial, const std::string& failed_stage,
                            const std::string& error) {
    manifest["partial"] = partial;
    if (partial) {
      manifest["failed_stage"] = failed_stage;
      manifest["error"] = error;
    }
    manifest["stages"] = stages_run;
    manifest["warnings"] = result.warnings;
    nlohmann::json files = nlohmann::json::object();
    for (const auto& [name, hash] : file_hashes) files[name] = hash;
    manifest["files"] = files;
    const std::string text = manifest.dump(2) + "\n";
    write_file(cfg.output_dir / "manifest.json", text);
    result.manifest_json = text;
  };

  std::string stage = "load";
  try {
    // --- load ---
    stages_run.push_back(stage);
    const tabular::SchemaFile schema = tabular::read_schema_file(cfg.schema_file);
    const std::string csv_bytes = read_file(cfg.input_csv);
    const tabular::Dataset dataset =
        tabular::load_csv(cfg.input_csv, schema.features, schema.label_column);
    const std::string dataset_id = fnv1a64_hex(csv_bytes);
    manifest["dataset_id"] = dataset_id;
    manifest["input_rows"] = dataset.n_rows();

    // --- exclude ---
    stage = "exclude";
    stages_run.push_back(stage);
    const tabular::ExclusionResult ex = tabular::exclude_rows(dataset);
    manifest["excluded_row_ids"] = ex.dropped;

    // --- split ---
    stage = "split";
    stages_run.push_back(stage);
    const tabular::SplitResult sp =
        tabular::split(ex.kept, cfg.train_fraction, derive_seed(cfg.seed, "split"));
    result.test_row_ids = sp.test.row_ids();
    manifest["train_rows"] = sp.train.n_rows();
    manifest["test_rows"] = sp.test.n_rows();
    manifest["test_row_ids"] = sp.test.row_ids();

    // --- preprocess ---
    stage = "preprocess";
    stages_run.push_back(stage);
    const bool leaky = cfg.order == StageOrder::fit_before_split;
    const tabular::FittedPreprocessor prep =
        tabular::fit_preprocessor(leaky ? ex.kept : sp.train);
    tabular::DesignMatrix dtrain = tabular::apply_preprocessor(prep, sp.train);
    tabular::DesignMatrix dtest = tabular::apply_preprocessor(prep, sp.test);
    for (const auto& w : dtrain.warnings) result.warnings.push_back(w);
    for (const auto& w : dtest.warnings) result.warnings.push_back(w);

    // Selection sees the training design by default; under "paper-order" it
    // sees the full pre-split design, reproducing the published sequence.
    std::optional<tabular::DesignMatrix> dfull;
    if (leaky) dfull = tabular::apply_preprocessor(prep, ex.kept);
    const tabular::DesignMatrix& sel_design = leaky ? *dfull : dtrain;

    const forest::ForestConfig base = base_forest_config(cfg);
    const std::vector<std::string> design_names = prep.design_column_names();

    // --- lasso ---
    std::optional<selection::SelectionResult> selected_result;
    if (cfg.lasso) {
      stage = "lasso";
      stages_run.push_back(stage);
      const std::vector<double> y_real(sel_design.y.begin(), sel_design.y.end());
      double lambda_used = 0.0;
      if (cfg.lambda.has_value()) {
        lambda_used = *cfg.lambda;
      } else {
        const selection::LambdaChoice choice = selection::select_lambda(
            sel_design.X, sel_design.y, cfg.lambda_grid_points, cfg.cv_folds,
            derive_seed(cfg.seed, "lambda"), base, cfg.lasso_max_iter, cfg.lasso_tol);
        lambda_used = choice.lambda;
      }
      manifest["lambda"] = lambda_used;
      const selection::LassoModel lasso_model = selection::fit_lasso(
          sel_design.X, y_real, lambda_used, cfg.lasso_max_iter, cfg.lasso_tol);
      if (!lasso_model.converged) {
        result.warnings.push_back(
            "lasso did not reach the convergence tolerance within " +
            std::to_string(cfg.lasso_max_iter) + " sweeps");
      }
      selected_result = selection::lasso_select(lasso_model);
      for (const auto& w : selected_result->warnings) result.warnings.push_back(w);
    }

    // --- rfe ---
    if (cfg.rfe) {
      stage = "rfe";
      stages_run.push_back(stage);
      const Matrix X_cur = selected_result.has_value()
                               ? sel_design.X.select_columns(selected_result->kept_columns)
                               : sel_design.X;
      selection::RfeConfig rfe_cfg;
      rfe_cfg.target_count =
          static_cast<int>(std::min<std::size_t>(cfg.rfe_target, X_cur.cols()));
      rfe_cfg.step = cfg.rfe_step;
      rfe_cfg.cv_folds = cfg.cv_folds;
      rfe_cfg.seed = derive_seed(cfg.seed, "rfe");
      rfe_cfg.forest_cfg = base;
      const selection::SelectionResult rfe_result =
          selection::rfe(X_cur, sel_design.y, rfe_cfg);
      selected_result = selected_result.has_value()
                            ? selection::compose(*selected_result, rfe_result)
                            : rfe_result;
    }

    std::vector<std::size_t> selected =
        selected_result.has_value() ? selected_result->kept_columns
                                    : identity_columns(dtrain.X.cols());
    result.selected_columns = selected;
    for (std::size_t j : selected) result.selected_names.push_back(design_names[j]);
    if (selected_result.has_value()) {
      std::ostringstream sel_out;
      selection::write_selection_report(sel_out, *selected_result, design_names);
      emit_file("selection.txt", sel_out.str());
    }
    manifest["selected_columns"] = result.selected_names;

    const Matrix X_train_sel = dtrain.X.select_columns(selected);
    const Matrix X_test_sel = dtest.X.select_columns(selected);

    // --- smote ---
    Matrix train_X = X_train_sel;
    std::vector<int> train_y = dtrain.y;
    resample::SmoteConfig smote_cfg;
    smote_cfg.k_neighbors = cfg.smote_k;
    smote_cfg.target_ratio = cfg.smote_ratio;
    smote_cfg.seed = derive_seed(cfg.seed, "smote");
    if (cfg.smote) {
      stage = "smote";
      stages_run.push_back(stage);
      resample::SmoteResult res = resample::smote(X_train_sel, dtrain.y, smote_cfg);
      train_X = std::move(res.X);
      train_y = std::move(res.y);
      if (cfg.smote_audit) {
        std::ostringstream audit;
        resample::write_smote_audit(audit, res.provenance);
        emit_file("smote_audit.csv", audit.str());
      }
    }

    // --- grid_search ---
    forest::ForestConfig final_cfg = base;
    if (cfg.grid_search) {
      stage = "grid_search";
      stages_run.push_back(stage);
      const tuning::FoldPlan folds = tuning::stratified_kfold(
          dtrain.y, cfg.cv_folds, derive_seed(cfg.seed, "folds"));
      result.cv = tuning::grid_search(
          X_train_sel, dtrain.y, cfg.grid, folds,
          cfg.smote ? std::optional<resample::SmoteConfig>(smote_cfg) : std::nullopt,
          base, cfg.cv_metric);
      final_cfg = result.cv->best().config;
      std::ostringstream cv_out;
      tuning::write_cv_csv(cv_out, *result.cv);
      emit_file("cv_results.csv", cv_out.str());
    }

    // --- train ---
    stage = "train";
    stages_run.push_back(stage);
    final_cfg.seed = derive_seed(cfg.seed, "final_forest");
    final_cfg.n_threads = cfg.threads;
    ModelBundle bundle;
    bundle.preprocessor = prep;
    bundle.label_column = schema.label_column;
    bundle.selected_columns = selected;
    bundle.model = forest::fit_forest(train_X, train_y, final_cfg, result.selected_names);
    std::ostringstream bundle_out;
    write_bundle(bundle_out, bundle);
    const std::string bundle_bytes = bundle_out.str();
    emit_file("model.bundle", bundle_bytes);
    const std::string model_id = fnv1a64_hex(bundle_bytes);
    manifest["model_id"] = model_id;

    // --- evaluate ---
    stage = "evaluate";
    stages_run.push_back(stage);
    const std::vector<double> scores = forest::predict_proba_rows(bundle.model, X_test_sel);
    const std::vector<int> preds = forest::predict_rows(bundle.model, X_test_sel);
    result.report.confusion = metrics::confusion(dtest.y, preds);
    result.report.metrics = metrics::classification_metrics(result.report.confusion);
    result.report.roc = metrics::roc_auc(dtest.y, scores);
    result.report.model_id = model_id;
    result.report.dataset_id = dataset_id;
    result.report.seed = cfg.seed;
    emit_file("eval_report.json", metrics::eval_report_to_json(result.report));
    std::ostringstream roc_out;
    metrics::write_roc_csv(roc_out, result.report.roc);
    emit_file("roc_points.csv", roc_out.str());

    // --- explain ---
    if (cfg.explain) {
      stage = "explain";
      stages_run.push_back(stage);
      const std::size_t n_train = X_train_sel.rows();
      const std::size_t bg_count =
          std::min<std::size_t>(static_cast<std::size_t>(cfg.shap_background), n_train);
      Rng bg_rng(derive_seed(cfg.seed, "shap_background"));
      const std::vector<std::size_t> bg_rows =
          bg_rng.sample_without_replacement(n_train, bg_count);
      const Matrix background = X_train_sel.select_rows(bg_rows);

      const std::size_t n_inst = std::min<std::size_t>(
          static_cast<std::size_t>(cfg.shap_instances), X_test_sel.rows());
      const std::size_t p = selected.size();
      std::vector<explain::ShapExplanation> explanations;
      std::vector<std::int64_t> instance_ids;
      bool sampled_warned = false;
      for (std::size_t i = 0; i < n_inst; ++i) {
        explain::ValueFunction v;
        v.model = &bundle.model;
        v.background = background;
        const auto row = X_test_sel.row(i);
        v.instance.assign(row.begin(), row.end());
        if (p <= static_cast<std::size_t>(kShapExactLimit)) {
          explanations.push_back(explain::shap_exact(v, kShapExactLimit));
        } else {
          if (!sampled_warned) {
            result.warnings.push_back(
                std::to_string(p) + " features exceed the exact Shapley limit of " +
                std::to_string(kShapExactLimit) + "; using " +
                std::to_string(cfg.shap_permutations) + " sampled permutations");
            sampled_warned = true;
          }
          explanations.push_back(explain::shap_sampled(
              v, cfg.shap_permutations, derive_seed(cfg.seed, "shap", i)));
        }
        instance_ids.push_back(dtest.row_ids[i]);
      }
      std::ostringstream shap_out;
      explain::write_shap_csv(shap_out, instance_ids, explanations, result.selected_names);
      emit_file("shap_values.csv", shap_out.str());
      const explain::GlobalShapSummary summary = explain::global_summary(explanations);
      emit_file("shap_summary.json",
                explain::global_summary_to_json(summary, result.selected_names));
    }

    write_manifest(false, "", "");
    lock.release();
    return result;
  } catch (const std::exception& e) {
    try {
      write_manifest(true, stage, e.what());
    } catch (...) {
      // The partial manifest is best effort; the original error wins.
    }
    rethrow_in_stage(stage);
  }
}

AblationResult run_ablation(const PipelineConfig& cfg, bool independent) {
  if (cfg.output_dir.empty()) throw ConfigError("ablation requires output_dir");

  struct RowPlan {
    const char* label;
    const char* slug;
    bool smote;
    bool lasso;
    bool grid;
  };
  // Toggle columns hold the cumulative reading (each row adds one stage);
  // independent mode instead enables exactly one stage per row.
  const RowPlan plans[4] = {
      {"RandomForest", "run_0_baseline", false, false, false},
      {"w/ SMOTE", "run_1_smote", true, false, false},
      {"w/ LASSO", "run_2_lasso", true, true, false},
      {"w/ Grid Search", "run_3_grid", true, true, true},
  };

  AblationResult out;
  for (int i = 0; i < 4; ++i) {
    PipelineConfig rc = cfg;
    rc.smote = independent ? (i == 1) : plans[i].smote;
    rc.lasso = independent ? (i == 2) : plans[i].lasso;
    rc.grid_search = independent ? (i == 3) : plans[i].grid;
    rc.rfe = false;
    rc.explain = false;
    rc.output_dir = cfg.output_dir / plans[i].slug;
    PipelineResult run = run_pipeline(rc);
    AblationRow row;
    row.label = plans[i].label;
    row.metrics = run.report.metrics;
    row.auc = run.report.roc.auc;
    out.rows.push_back(std::move(row));
    out.runs.push_back(std::move(run));
  }

  std::ostringstream csv;
  write_ablation_csv(csv, out);
  write_file(cfg.output_dir / "ablation.csv", csv.str());
  return out;
}

void write_ablation_csv(std::ostream& out, const AblationResult& result) {
  out << "label,precision,recall,f1,accuracy\n";
  for (const auto& row : result.rows) {
    out << row.label << ',' << format_double(row.metrics.precision) << ','
        << format_double(row.metrics.recall) << ',' << format_double(row.metrics.f1)
        << ',' << format_double(row.metrics.accuracy) << '\n';
  }
}

}  // namespace tabrisk::pipeline
