#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tabrisk/common.hpp"
#include "tabrisk/forest.hpp"

namespace tabrisk::selection {

struct LassoModel {
  std::vector<double> beta;
  double intercept = 0.0;
  double lambda = 0.0;
  int iterations_run = 0;
  bool converged = false;
};

// Minimizes sum_i (y_i - intercept - x_i.beta)^2 + lambda * sum_j |beta_j|
// (unaveraged, so lambda scales with the number of rows). The intercept is
// unpenalized and fixed at mean(y); cyclic coordinate descent soft-thresholds
// each coordinate. `converged` requires both the largest coefficient change
// of a sweep to fall below tol and every coordinate to satisfy its subgradient
// condition: |2 sum_i x_ij r_i| <= lambda where beta_j = 0, and
// 2 sum_i x_ij r_i = lambda * sign(beta_j) otherwise, within 5*tol.
LassoModel fit_lasso(const Matrix& X, const std::vector<double>& y, double lambda,
                     int max_iter = 50000, double tol = 1e-8);

// The exact objective above; exposed so callers can assert it never increases.
double lasso_objective(const Matrix& X, const std::vector<double>& y, const LassoModel& model);

// Smallest lambda whose fit is the exact zero vector: max_j |2 sum_i x_ij (y_i - ybar)|.
double lambda_max(const Matrix& X, const std::vector<double>& y);

enum class SelectionMethod { lasso, rfe, lasso_then_rfe };
std::string to_string(SelectionMethod method);
SelectionMethod selection_method_from_string(std::string_view text);

struct TraceStep {
  int step = 0;
  std::vector<std::size_t> removed;  // design-matrix column indices, ascending
  double score = 0.0;  // lasso step: the lambda used; rfe step: that round's CV accuracy
};

struct SelectionResult {
  std::vector<std::size_t> kept_columns;  // strictly increasing, never empty
  SelectionMethod method = SelectionMethod::lasso;
  std::vector<TraceStep> trace;
  std::vector<std::string> warnings;
};

// Keeps columns with |beta_j| > threshold; an empty pick falls back to the
// single largest-|beta| column (lowest index on ties) with a warning.
SelectionResult lasso_select(const LassoModel& model, double threshold = 0.0);

struct RfeConfig {
  int target_count = 10;
  int step = 1;
  int cv_folds = 5;
  std::uint64_t seed = 0;
  forest::ForestConfig forest_cfg{};  // ranking and CV-scoring model
};

// Each round scores the surviving columns by stratified-CV accuracy, fits a
// forest on all rows for importance, and drops the `step` lowest-importance
// columns (ties toward the lower index), stopping at exactly target_count.
SelectionResult rfe(const Matrix& X, const std::vector<int>& y, const RfeConfig& cfg);

// Rewrites `second`, whose column indices refer to positions within
// first.kept_columns, into original design indices and appends its trace.
SelectionResult compose(const SelectionResult& first, const SelectionResult& second);

struct LambdaChoice {
  double lambda = 0.0;
  std::size_t best_index = 0;
  std::vector<double> grid;    // descending from lambda_max
  std::vector<double> scores;  // CV accuracy of a forest on each lambda's selection
};

// 20-point log grid from lambda_max down to lambda_max/1000; each candidate
// support is scored by stratified-CV accuracy of `eval_cfg` forests (repeated
// supports are evaluated once); ties keep the earlier (sparser) grid point.
LambdaChoice select_lambda(const Matrix& X, const std::vector<int>& y, int n_points,
                           int cv_folds, std::uint64_t seed,
                           const forest::ForestConfig& eval_cfg, int lasso_max_iter = 50000,
                           double lasso_tol = 1e-8);

void write_selection_report(std::ostream& out, const SelectionResult& result,
                            const std::vector<std::string>& column_names);

}  // namespace tabrisk::selection
