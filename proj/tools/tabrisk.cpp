// tabrisk: train, tune, evaluate and explain a random-forest risk model on
// tabular clinical-style CSV data. Subcommands: synth, pipeline, ablate,
// evaluate, explain. Exit codes: 0 success, 1 configuration error, 2 data
// error, 3 stage failure.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tabrisk/common.hpp"
#include "tabrisk/explain.hpp"
#include "tabrisk/forest.hpp"
#include "tabrisk/metrics.hpp"
#include "tabrisk/pipeline.hpp"
#include "tabrisk/rng.hpp"
#include "tabrisk/synthetic.hpp"
#include "tabrisk/tabular.hpp"
#include "tabrisk/tuning.hpp"

namespace fs = std::filesystem;
using namespace tabrisk;

namespace {

constexpr int kShapExactLimit = 15;

template <typename Fn>
int run_guarded(Fn&& fn) {
  try {
    fn();
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 2;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

struct SynthArgs {
  synth::SyntheticSpec spec;
  std::string out_dir;
};

void run_synth(const SynthArgs& args) {
  const synth::SyntheticData data = synth::generate_synthetic(args.spec);
  fs::create_directories(args.out_dir);
  std::ostringstream csv;
  tabular::write_csv(csv, data.dataset, data.schema.label_column);
  write_file(fs::path(args.out_dir) / "data.csv", csv.str());
  write_file(fs::path(args.out_dir) / "schema.txt",
             tabular::serialize_schema(data.schema));
  std::cout << "wrote " << (fs::path(args.out_dir) / "data.csv").string() << " ("
            << data.dataset.n_rows() << " rows) and schema.txt\n";
}

// Options shared by `pipeline` and `ablate`: a config file plus flag
// overrides, where a flag wins only when it was actually given.
struct PipelineArgs {
  std::string config_path;
  std::string input;
  std::string schema;
  std::string out_dir;
  std::uint64_t seed = 0;
  double train_fraction = 0.0;
  int threads = 0;
  int cv_folds = 0;
  std::string cv_metric;
  std::string lambda_text;
  bool lasso = true;
  bool rfe = true;
  bool smote = true;
  bool grid = true;
  bool explain_stage = true;
  bool paper_order = false;
  bool audit = false;
  bool print_config = false;

  CLI::Option* o_input = nullptr;
  CLI::Option* o_schema = nullptr;
  CLI::Option* o_out = nullptr;
  CLI::Option* o_seed = nullptr;
  CLI::Option* o_fraction = nullptr;
  CLI::Option* o_threads = nullptr;
  CLI::Option* o_folds = nullptr;
  CLI::Option* o_metric = nullptr;
  CLI::Option* o_lambda = nullptr;
  CLI::Option* o_lasso = nullptr;
  CLI::Option* o_rfe = nullptr;
  CLI::Option* o_smote = nullptr;
  CLI::Option* o_grid = nullptr;
  CLI::Option* o_explain = nullptr;
  CLI::Option* o_order = nullptr;
  CLI::Option* o_audit = nullptr;
};

void add_pipeline_options(CLI::App* sub, PipelineArgs& a) {
  sub->add_option("--config", a.config_path, "pipeline configuration file");
  a.o_input = sub->add_option("--input", a.input, "input CSV path");
  a.o_schema = sub->add_option("--schema", a.schema, "schema file path");
  a.o_out = sub->add_option("--out", a.out_dir, "run output directory");
  a.o_seed = sub->add_option("--seed", a.seed, "top-level seed");
  a.o_fraction =
      sub->add_option("--train-fraction", a.train_fraction, "training split fraction");
  a.o_threads = sub->add_option("--threads", a.threads, "worker threads (0 = all cores)");
  a.o_folds = sub->add_option("--cv-folds", a.cv_folds, "cross-validation folds");
  a.o_metric =
      sub->add_option("--cv-metric", a.cv_metric, "fold score: accuracy or auc");
  a.o_lambda =
      sub->add_option("--lambda", a.lambda_text, "L1 penalty, or 'auto' to cross-validate");
  a.o_lasso = sub->add_flag("--lasso,!--no-lasso", a.lasso, "toggle the L1 selection stage");
  a.o_rfe = sub->add_flag("--rfe,!--no-rfe", a.rfe, "toggle recursive feature elimination");
  a.o_smote = sub->add_flag("--smote,!--no-smote", a.smote, "toggle minority oversampling");
  a.o_grid =
      sub->add_flag("--grid-search,!--no-grid-search", a.grid, "toggle hyperparameter search");
  a.o_explain =
      sub->add_flag("--explain,!--no-explain", a.explain_stage, "toggle Shapley explanations");
  a.o_order = sub->add_flag(
      "--paper-order,!--default-order", a.paper_order,
      "fit preprocessing and selection before the split (published order)");
  a.o_audit = sub->add_flag("--audit,!--no-audit", a.audit,
                            "write the oversampling provenance CSV");
  sub->add_flag("--print-config", a.print_config,
                "print the effective configuration and exit");
}

pipeline::PipelineConfig effective_config(const PipelineArgs& a) {
  pipeline::PipelineConfig cfg;
  if (!a.config_path.empty()) cfg = pipeline::read_pipeline_config(a.config_path);
  if (a.o_input->count()) cfg.input_csv = a.input;
  if (a.o_schema->count()) cfg.schema_file = a.schema;
  if (a.o_out->count()) cfg.output_dir = a.out_dir;
  if (a.o_seed->count()) cfg.seed = a.seed;
  if (a.o_fraction->count()) cfg.train_fraction = a.train_fraction;
  if (a.o_threads->count()) cfg.threads = a.threads;
  if (a.o_folds->count()) cfg.cv_folds = a.cv_folds;
  if (a.o_metric->count()) cfg.cv_metric = tuning::cv_metric_from_string(a.cv_metric);
  if (a.o_lambda->count()) {
    if (a.lambda_text == "auto") {
      cfg.lambda.reset();
    } else {
      cfg.lambda = parse_double(a.lambda_text, "--lambda");
    }
  }
  if (a.o_lasso->count()) cfg.lasso = a.lasso;
  if (a.o_rfe->count()) cfg.rfe = a.rfe;
  if (a.o_smote->count()) cfg.smote = a.smote;
  if (a.o_grid->count()) cfg.grid_search = a.grid;
  if (a.o_explain->count()) cfg.explain = a.explain_stage;
  if (a.o_order->count()) {
    cfg.order = a.paper_order ? pipeline::StageOrder::fit_before_split
                              : pipeline::StageOrder::train_only;
  }
  if (a.o_audit->count()) cfg.smote_audit = a.audit;
  return cfg;
}

void run_pipeline_cmd(const PipelineArgs& a) {
  const pipeline::PipelineConfig cfg = effective_config(a);
  if (a.print_config) {
    std::cout << pipeline::serialize_pipeline_config(cfg);
    return;
  }
  const pipeline::PipelineResult result = pipeline::run_pipeline(cfg);
  for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
  std::cout << "run complete: " << result.run_dir.string() << '\n'
            << "  accuracy " << format_double(result.report.metrics.accuracy)
            << ", auc " << format_double(result.report.roc.auc) << '\n';
}

void run_ablate_cmd(const PipelineArgs& a, bool independent) {
  const pipeline::PipelineConfig cfg = effective_config(a);
  if (a.print_config) {
    std::cout << pipeline::serialize_pipeline_config(cfg);
    return;
  }
  const pipeline::AblationResult result = pipeline::run_ablation(cfg, independent);
  std::ostringstream table;
  pipeline::write_ablation_csv(table, result);
  std::cout << table.str();
  std::cout << "wrote " << (cfg.output_dir / "ablation.csv").string() << '\n';
}

struct ModelDataArgs {
  std::string model_path;
  std::string data_path;
  std::string out_dir;
};

struct LoadedModel {
  pipeline::ModelBundle bundle;
  std::string bundle_bytes;
  tabular::DesignMatrix design;
  Matrix X;
  std::string dataset_id;
};

LoadedModel load_model_and_data(const ModelDataArgs& args) {
  LoadedModel loaded;
  loaded.bundle_bytes = read_file(args.model_path);
  std::istringstream in(loaded.bundle_bytes);
  loaded.bundle = pipeline::read_bundle(in);
  const std::string csv_bytes = read_file(args.data_path);
  loaded.dataset_id = fnv1a64_hex(csv_bytes);
  const tabular::Dataset dataset = tabular::load_csv(
      args.data_path, loaded.bundle.preprocessor.schema, loaded.bundle.label_column);
  loaded.design = tabular::apply_preprocessor(loaded.bundle.preprocessor, dataset);
  for (const auto& w : loaded.design.warnings) std::cerr << "warning: " << w << '\n';
  loaded.X = loaded.design.X.select_columns(loaded.bundle.selected_columns);
  return loaded;
}

void run_evaluate(const ModelDataArgs& args) {
  const LoadedModel loaded = load_model_and_data(args);
  metrics::EvalReport report;
  report.confusion = metrics::confusion(
      loaded.design.y, forest::predict_rows(loaded.bundle.model, loaded.X));
  report.metrics = metrics::classification_metrics(report.confusion);
  report.roc = metrics::roc_auc(loaded.design.y,
                                forest::predict_proba_rows(loaded.bundle.model, loaded.X));
  report.model_id = fnv1a64_hex(loaded.bundle_bytes);
  report.dataset_id = loaded.dataset_id;
  report.seed = loaded.bundle.model.config.seed;
  fs::create_directories(args.out_dir);
  write_file(fs::path(args.out_dir) / "eval_report.json",
             metrics::eval_report_to_json(report));
  std::ostringstream roc;
  metrics::write_roc_csv(roc, report.roc);
  write_file(fs::path(args.out_dir) / "roc_points.csv", roc.str());
  std::cout << "accuracy " << format_double(report.metrics.accuracy) << ", precision "
            << format_double(report.metrics.precision) << ", recall "
            << format_double(report.metrics.recall) << ", f1 "
            << format_double(report.metrics.f1) << ", auc "
            << format_double(report.roc.auc) << '\n'
            << "wrote " << (fs::path(args.out_dir) / "eval_report.json").string() << '\n';
}

struct ExplainArgs {
  ModelDataArgs io;
  int instances = 5;
  int background = 100;
  int permutations = 200;
  std::uint64_t seed = 42;
};

void run_explain(const ExplainArgs& args) {
  if (args.instances < 1) throw ConfigError("--instances must be >= 1");
  if (args.background < 1) throw ConfigError("--background must be >= 1");
  if (args.permutations < 1) throw ConfigError("--permutations must be >= 1");
  const LoadedModel loaded = load_model_and_data(args.io);
  const std::size_t n = loaded.X.rows();
  if (n == 0) throw DataError("explain: the data file has no rows");

  const std::size_t bg_count =
      std::min<std::size_t>(static_cast<std::size_t>(args.background), n);
  Rng bg_rng(derive_seed(args.seed, "shap_background"));
  const Matrix background =
      loaded.X.select_rows(bg_rng.sample_without_replacement(n, bg_count));

  const std::size_t n_inst =
      std::min<std::size_t>(static_cast<std::size_t>(args.instances), n);
  const std::size_t p = loaded.X.cols();
  std::vector<explain::ShapExplanation> explanations;
  std::vector<std::int64_t> instance_ids;
  for (std::size_t i = 0; i < n_inst; ++i) {
    explain::ValueFunction v;
    v.model = &loaded.bundle.model;
    v.background = background;
    const auto row = loaded.X.row(i);
    v.instance.assign(row.begin(), row.end());
    if (p <= static_cast<std::size_t>(kShapExactLimit)) {
      explanations.push_back(explain::shap_exact(v, kShapExactLimit));
    } else {
      if (i == 0) {
        std::cerr << "warning: " << p << " features exceed the exact Shapley limit of "
                  << kShapExactLimit << "; using " << args.permutations
                  << " sampled permutations\n";
      }
      explanations.push_back(explain::shap_sampled(v, args.permutations,
                                                   derive_seed(args.seed, "shap", i)));
    }
    instance_ids.push_back(loaded.design.row_ids[i]);
  }

  fs::create_directories(args.io.out_dir);
  std::ostringstream shap_csv;
  explain::write_shap_csv(shap_csv, instance_ids, explanations,
                          loaded.bundle.model.column_names);
  write_file(fs::path(args.io.out_dir) / "shap_values.csv", shap_csv.str());
  write_file(fs::path(args.io.out_dir) / "shap_summary.json",
             explain::global_summary_to_json(explain::global_summary(explanations),
                                             loaded.bundle.model.column_names));
  std::cout << "explained " << n_inst << " instances; wrote "
            << (fs::path(args.io.out_dir) / "shap_values.csv").string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tabular risk-prediction toolkit: preprocess, select, oversample,\n"
               "tune, train, evaluate and explain a random-forest classifier"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth_cmd =
      app.add_subcommand("synth", "generate a synthetic clinical-style dataset");
  synth_cmd->add_option("--rows", synth_args.spec.n_rows, "number of rows")
      ->capture_default_str();
  synth_cmd
      ->add_option("--positive-rate", synth_args.spec.positive_rate,
                   "target positive label fraction")
      ->capture_default_str();
  synth_cmd
      ->add_option("--continuous", synth_args.spec.n_continuous,
                   "continuous feature count")
      ->capture_default_str();
  synth_cmd
      ->add_option("--categorical", synth_args.spec.n_categorical,
                   "categorical feature count")
      ->capture_default_str();
  synth_cmd
      ->add_option("--interaction", synth_args.spec.interaction_strength,
                   "pairwise interaction strength")
      ->capture_default_str();
  synth_cmd->add_option("--noise", synth_args.spec.noise_level, "label noise level")
      ->capture_default_str();
  synth_cmd
      ->add_option("--missing-rate", synth_args.spec.missing_rate,
                   "fraction of feature cells masked as missing")
      ->capture_default_str();
  synth_cmd->add_option("--seed", synth_args.spec.seed, "generator seed")
      ->capture_default_str();
  synth_cmd->add_option("--out", synth_args.out_dir, "output directory")->required();

  PipelineArgs pipe_args;
  CLI::App* pipe_cmd = app.add_subcommand(
      "pipeline", "run the end-to-end training and evaluation pipeline");
  add_pipeline_options(pipe_cmd, pipe_args);

  PipelineArgs ablate_args;
  bool independent = false;
  CLI::App* ablate_cmd = app.add_subcommand(
      "ablate", "run the four-stage ablation table on one shared split");
  add_pipeline_options(ablate_cmd, ablate_args);
  ablate_cmd->add_flag("--independent", independent,
                       "enable each stage alone instead of cumulatively");

  ModelDataArgs eval_args;
  CLI::App* eval_cmd =
      app.add_subcommand("evaluate", "score a saved model bundle on a CSV file");
  eval_cmd->add_option("--model", eval_args.model_path, "model bundle path")->required();
  eval_cmd->add_option("--data", eval_args.data_path, "labelled CSV path")->required();
  eval_cmd->add_option("--out", eval_args.out_dir, "output directory")->required();

  ExplainArgs explain_args;
  CLI::App* explain_cmd = app.add_subcommand(
      "explain", "compute per-instance Shapley attributions for a saved model");
  explain_cmd->add_option("--model", explain_args.io.model_path, "model bundle path")
      ->required();
  explain_cmd->add_option("--data", explain_args.io.data_path, "labelled CSV path")
      ->required();
  explain_cmd->add_option("--out", explain_args.io.out_dir, "output directory")
      ->required();
  explain_cmd->add_option("--instances", explain_args.instances, "rows to explain")
      ->capture_default_str();
  explain_cmd
      ->add_option("--background", explain_args.background, "background sample size")
      ->capture_default_str();
  explain_cmd
      ->add_option("--permutations", explain_args.permutations,
                   "permutations when sampling is needed")
      ->capture_default_str();
  explain_cmd->add_option("--seed", explain_args.seed, "sampling seed")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (synth_cmd->parsed()) return run_guarded([&] { run_synth(synth_args); });
  if (pipe_cmd->parsed()) return run_guarded([&] { run_pipeline_cmd(pipe_args); });
  if (ablate_cmd->parsed())
    return run_guarded([&] { run_ablate_cmd(ablate_args, independent); });
  if (eval_cmd->parsed()) return run_guarded([&] { run_evaluate(eval_args); });
  if (explain_cmd->parsed()) return run_guarded([&] { run_explain(explain_args); });
  return 1;
}
