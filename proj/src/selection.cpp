#include "tabrisk/selection.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "tabrisk/metrics.hpp"
#include "tabrisk/rng.hpp"
#include "tabrisk/tuning.hpp"

namespace tabrisk::selection {
namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

void check_finite(const Matrix& X, const std::vector<double>& y) {
  for (double v : X.data())
    if (!std::isfinite(v)) throw DataError("lasso: design matrix has non-finite entries");
  for (double v : y)
    if (!std::isfinite(v)) throw DataError("lasso: target vector has non-finite entries");
}

}  // namespace

double lambda_max(const Matrix& X, const std::vector<double>& y) {
  if (y.size() != X.rows()) throw DataError("lambda_max: target length mismatch");
  if (y.empty()) throw DataError("lambda_max: empty input");
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(y.size());
  double best = 0.0;
  for (std::size_t j = 0; j < X.cols(); ++j) {
    double dot = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) dot += X(i, j) * (y[i] - ybar);
    best = std::max(best, std::abs(2.0 * dot));
  }
  return best;
}

LassoModel fit_lasso(const Matrix& X, const std::vector<double>& y, double lambda,
                     int max_iter, double tol) {
  if (y.size() != X.rows()) throw DataError("lasso: target length mismatch");
  if (y.empty()) throw DataError("lasso: empty input");
  if (lambda < 0.0) throw ConfigError("lasso lambda must be >= 0");
  if (max_iter < 1) throw ConfigError("lasso max_iter must be >= 1");
  if (!(tol > 0.0)) throw ConfigError("lasso tol must be > 0");
  check_finite(X, y);

  const std::size_t n = X.rows();
  const std::size_t p = X.cols();
  LassoModel model;
  model.lambda = lambda;
  model.beta.assign(p, 0.0);
  double ybar = 0.0;
  for (double v : y) ybar += v;
  ybar /= static_cast<double>(n);
  model.intercept = ybar;

  std::vector<double> col_sq(p, 0.0);
  for (std::size_t j = 0; j < p; ++j)
    for (std::size_t i = 0; i < n; ++i) col_sq[j] += X(i, j) * X(i, j);

  std::vector<double> r(n);
  for (std::size_t i = 0; i < n; ++i) r[i] = y[i] - ybar;

  // The external contract promises subgradient residuals within 10*tol; the
  // internal bound of 5*tol leaves headroom for accumulated rounding.
  const double slack = 5.0 * tol;
  const double half_lambda = lambda / 2.0;
  for (int iter = 1; iter <= max_iter; ++iter) {
    double max_delta = 0.0;
    for (std::size_t j = 0; j < p; ++j) {
      if (col_sq[j] == 0.0) continue;  // all-zero column keeps coefficient 0
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += X(i, j) * r[i];
      const double rho = dot + model.beta[j] * col_sq[j];
      const double updated = soft_threshold(rho, half_lambda) / col_sq[j];
      const double delta = updated - model.beta[j];
      if (delta != 0.0) {
        for (std::size_t i = 0; i < n; ++i) r[i] -= X(i, j) * delta;
        model.beta[j] = updated;
      }
      max_delta = std::max(max_delta, std::abs(delta));
    }
    model.iterations_run = iter;
    if (max_delta >= tol) continue;

    // Sweep settled: rebuild the residual from scratch to clear drift, then
    // accept only if every coordinate meets its subgradient condition.
    for (std::size_t i = 0; i < n; ++i) {
      double fitted = 0.0;
      for (std::size_t j = 0; j < p; ++j) fitted += X(i, j) * model.beta[j];
      r[i] = y[i] - ybar - fitted;
    }
    bool stationary = true;
    for (std::size_t j = 0; j < p && stationary; ++j) {
      if (col_sq[j] == 0.0) continue;
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += X(i, j) * r[i];
      const double gradient = 2.0 * dot;
      if (model.beta[j] == 0.0)
        stationary = std::abs(gradient) <= lambda + slack;
      else
        stationary = std::abs(gradient - (model.beta[j] > 0.0 ? lambda : -lambda)) <= slack;
    }
    if (stationary) {
      model.converged = true;
      break;
    }
  }
  return model;
}

double lasso_objective(const Matrix& X, const std::vector<double>& y, const LassoModel& model) {
  if (model.beta.size() != X.cols() || y.size() != X.rows())
    throw DataError("lasso_objective: shape mismatch");
  double sse = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double fitted = model.intercept;
    for (std::size_t j = 0; j < X.cols(); ++j) fitted += X(i, j) * model.beta[j];
    const double e = y[i] - fitted;
    sse += e * e;
  }
  double l1 = 0.0;
  for (double b : model.beta) l1 += std::abs(b);
  return sse + model.lambda * l1;
}

std::string to_string(SelectionMethod method) {
  switch (method) {
    case SelectionMethod::lasso:
      return "lasso";
    case SelectionMethod::rfe:
      return "rfe";
    case SelectionMethod::lasso_then_rfe:
    default:
      return "lasso_then_rfe";
  }
}

SelectionMethod selection_method_from_string(std::string_view text) {
  if (text == "lasso") return SelectionMethod::lasso;
  if (text == "rfe") return SelectionMethod::rfe;
  if (text == "lasso_then_rfe") return SelectionMethod::lasso_then_rfe;
  throw ConfigError("unknown selection method '" + std::string(text) + "'");
}

SelectionResult lasso_select(const LassoModel& model, double threshold) {
  if (model.beta.empty()) throw ConfigError("lasso_select: model has no coefficients");
  SelectionResult result;
  result.method = SelectionMethod::lasso;
  for (std::size_t j = 0; j < model.beta.size(); ++j)
    if (std::abs(model.beta[j]) > threshold) result.kept_columns.push_back(j);
  if (result.kept_columns.empty()) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < model.beta.size(); ++j)
      if (std::abs(model.beta[j]) > std::abs(model.beta[best])) best = j;
    result.kept_columns.push_back(best);
    result.warnings.push_back(
        "lasso selected no columns; keeping the single largest-coefficient column " +
        std::to_string(best));
  }
  TraceStep step;
  step.step = 1;
  step.score = model.lambda;
  for (std::size_t j = 0; j < model.beta.size(); ++j)
    if (!std::binary_search(result.kept_columns.begin(), result.kept_columns.end(), j))
      step.removed.push_back(j);
  result.trace.push_back(std::move(step));
  return result;
}

namespace {

double cv_accuracy(const Matrix& X, const std::vector<int>& y, const tuning::FoldPlan& folds,
                   const forest::ForestConfig& cfg, std::uint64_t seed_base,
                   std::uint64_t seed_index) {
  double sum = 0.0;
  for (int f = 0; f < folds.k; ++f) {
    const auto train_rows = folds.training_rows(f);
    const auto val_rows = folds.held_out_rows(f);
    const Matrix X_train = X.select_rows(train_rows);
    const Matrix X_val = X.select_rows(val_rows);
    std::vector<int> y_train, y_val;
    for (std::size_t r : train_rows) y_train.push_back(y[r]);
    for (std::size_t r : val_rows) y_val.push_back(y[r]);
    forest::ForestConfig fold_cfg = cfg;
    fold_cfg.seed = derive_seed(seed_base, "selection_cv",
                                seed_index * static_cast<std::uint64_t>(folds.k) +
                                    static_cast<std::uint64_t>(f));
    const auto model = forest::fit_forest(X_train, y_train, fold_cfg);
    const auto c = metrics::confusion(y_val, forest::predict_rows(model, X_val));
    sum += metrics::classification_metrics(c).accuracy;
  }
  return sum / static_cast<double>(folds.k);
}

}  // namespace

SelectionResult rfe(const Matrix& X, const std::vector<int>& y, const RfeConfig& cfg) {
  if (cfg.target_count < 1 || static_cast<std::size_t>(cfg.target_count) > X.cols())
    throw ConfigError("rfe target_count must lie in [1, columns]");
  if (cfg.step < 1) throw ConfigError("rfe step must be >= 1");
  SelectionResult result;
  result.method = SelectionMethod::rfe;
  result.kept_columns.resize(X.cols());
  for (std::size_t j = 0; j < X.cols(); ++j) result.kept_columns[j] = j;
  if (result.kept_columns.size() == static_cast<std::size_t>(cfg.target_count)) return result;

  const auto folds = tuning::stratified_kfold(y, cfg.cv_folds, derive_seed(cfg.seed, "rfe_folds"));
  int round = 1;
  while (result.kept_columns.size() > static_cast<std::size_t>(cfg.target_count)) {
    const Matrix Xs = X.select_columns(result.kept_columns);
    TraceStep step;
    step.step = round;
    step.score = cv_accuracy(Xs, y, folds, cfg.forest_cfg, cfg.seed,
                             static_cast<std::uint64_t>(round));

    forest::ForestConfig fit_cfg = cfg.forest_cfg;
    fit_cfg.seed = derive_seed(cfg.seed, "rfe_fit", static_cast<std::uint64_t>(round));
    const auto model = forest::fit_forest(Xs, y, fit_cfg);
    const auto importance = forest::feature_importance(model);

    std::vector<std::pair<double, std::size_t>> ranked;  // (importance, original column)
    ranked.reserve(result.kept_columns.size());
    for (std::size_t i = 0; i < result.kept_columns.size(); ++i)
      ranked.emplace_back(importance[i], result.kept_columns[i]);
    std::sort(ranked.begin(), ranked.end());

    const std::size_t n_remove =
        std::min<std::size_t>(static_cast<std::size_t>(cfg.step),
                              result.kept_columns.size() -
                                  static_cast<std::size_t>(cfg.target_count));
    for (std::size_t i = 0; i < n_remove; ++i) step.removed.push_back(ranked[i].second);
    std::sort(step.removed.begin(), step.removed.end());
    std::vector<std::size_t> survivors;
    survivors.reserve(result.kept_columns.size() - n_remove);
    for (std::size_t col : result.kept_columns)
      if (!std::binary_search(step.removed.begin(), step.removed.end(), col))
        survivors.push_back(col);
    result.kept_columns = std::move(survivors);
    result.trace.push_back(std::move(step));
    ++round;
  }
  return result;
}

SelectionResult compose(const SelectionResult& first, const SelectionResult& second) {
  SelectionResult result;
  result.method = SelectionMethod::lasso_then_rfe;
  result.warnings = first.warnings;
  result.warnings.insert(result.warnings.end(), second.warnings.begin(),
                         second.warnings.end());
  result.trace = first.trace;
  int step = static_cast<int>(result.trace.size());
  for (const TraceStep& s : second.trace) {
    TraceStep mapped;
    mapped.step = ++step;
    mapped.score = s.score;
    for (std::size_t local : s.removed) mapped.removed.push_back(first.kept_columns[local]);
    std::sort(mapped.removed.begin(), mapped.removed.end());
    result.trace.push_back(std::move(mapped));
  }
  for (std::size_t local : second.kept_columns)
    result.kept_columns.push_back(first.kept_columns[local]);
  std::sort(result.kept_columns.begin(), result.kept_columns.end());
  return result;
}

LambdaChoice select_lambda(const Matrix& X, const std::vector<int>& y, int n_points,
                           int cv_folds, std::uint64_t seed,
                           const forest::ForestConfig& eval_cfg, int lasso_max_iter,
                           double lasso_tol) {
  if (n_points < 1) throw ConfigError("lambda grid needs at least one point");
  std::vector<double> target(y.begin(), y.end());
  const double top = lambda_max(X, target);

  LambdaChoice choice;
  choice.grid.reserve(static_cast<std::size_t>(n_points));
  for (int i = 0; i < n_points; ++i) {
    const double t = n_points == 1 ? 0.0
                                   : static_cast<double>(i) / static_cast<double>(n_points - 1);
    choice.grid.push_back(top * std::pow(1.0 / 1000.0, t));
  }

  const auto folds = tuning::stratified_kfold(y, cv_folds, derive_seed(seed, "lambda_folds"));
  std::map<std::vector<std::size_t>, double> memo;  // support -> CV accuracy
  choice.scores.reserve(choice.grid.size());
  std::uint64_t n_evaluated = 0;
  double best_score = 0.0;
  for (std::size_t i = 0; i < choice.grid.size(); ++i) {
    const auto model = fit_lasso(X, target, choice.grid[i], lasso_max_iter, lasso_tol);
    const auto selected = lasso_select(model);
    auto it = memo.find(selected.kept_columns);
    if (it == memo.end()) {
      const Matrix Xs = X.select_columns(selected.kept_columns);
      const double score = cv_accuracy(Xs, y, folds, eval_cfg, seed, n_evaluated++);
      it = memo.emplace(selected.kept_columns, score).first;
    }
    choice.scores.push_back(it->second);
    if (i == 0 || it->second > best_score) {
      best_score = it->second;
      choice.best_index = i;
    }
  }
  choice.lambda = choice.grid[choice.best_index];
  return choice;
}

void write_selection_report(std::ostream& out, const SelectionResult& result,
                            const std::vector<std::string>& column_names) {
  out << "method " << to_string(result.method) << '\n';
  out << "kept " << result.kept_columns.size() << '\n';
  for (std::size_t col : result.kept_columns) {
    out << "column " << col;
    if (col < column_names.size()) out << ' ' << column_names[col];
    out << '\n';
  }
  out << "trace " << result.trace.size() << '\n';
  for (const TraceStep& step : result.trace) {
    out << "step " << step.step << " score " << format_double(step.score) << " removed";
    for (std::size_t col : step.removed) out << ' ' << col;
    out << '\n';
  }
  for (const auto& warning : result.warnings) out << "warning " << warning << '\n';
}

}  // namespace tabrisk::selection
