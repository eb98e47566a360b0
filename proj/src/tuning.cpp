#include "tabrisk/tuning.hpp"

#include <algorithm>
#include <ostream>

#include "tabrisk/metrics.hpp"
#include "tabrisk/rng.hpp"

namespace tabrisk::tuning {

std::vector<std::size_t> FoldPlan::held_out_rows(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] == fold) rows.push_back(i);
  return rows;
}

std::vector<std::size_t> FoldPlan::training_rows(int fold) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < assignment.size(); ++i)
    if (assignment[i] != fold) rows.push_back(i);
  return rows;
}

FoldPlan stratified_kfold(const std::vector<int>& y, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("stratified_kfold requires k >= 2");
  std::vector<std::size_t> rows_of[2];
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw DataError("stratified_kfold: labels must be 0 or 1");
    rows_of[static_cast<std::size_t>(y[i])].push_back(i);
  }
  for (int c = 0; c < 2; ++c)
    if (rows_of[c].size() < static_cast<std::size_t>(k))
      throw ConfigError("stratified_kfold: class " + std::to_string(c) + " has only " +
                        std::to_string(rows_of[c].size()) + " rows for k=" + std::to_string(k));
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.assignment.assign(y.size(), 0);
  Rng rng(seed);
  int next_fold = 0;
  for (auto& rows : rows_of) {
    rng.shuffle(rows);
    for (std::size_t row : rows) {
      plan.assignment[row] = next_fold;
      next_fold = (next_fold + 1) % k;
    }
  }
  return plan;
}

std::size_t GridSpec::size() const {
  return n_trees.size() * max_depth.size() * min_samples_split.size() *
         features_per_split.size();
}

void GridSpec::validate() const {
  if (n_trees.empty() || max_depth.empty() || min_samples_split.empty() ||
      features_per_split.empty())
    throw ConfigError("grid axes must all be non-empty");
}

forest::ForestConfig GridSpec::cell(std::size_t index, const forest::ForestConfig& base) const {
  if (index >= size())
    throw ConfigError("grid cell index " + std::to_string(index) + " out of range (" +
                      std::to_string(size()) + " cells)");
  forest::ForestConfig cfg = base;
  cfg.features_per_split = features_per_split[index % features_per_split.size()];
  index /= features_per_split.size();
  cfg.min_samples_split = min_samples_split[index % min_samples_split.size()];
  index /= min_samples_split.size();
  cfg.max_depth = max_depth[index % max_depth.size()];
  index /= max_depth.size();
  cfg.n_trees = n_trees[index];
  return cfg;
}

std::string to_string(CvMetric metric) {
  return metric == CvMetric::accuracy ? "accuracy" : "auc";
}

CvMetric cv_metric_from_string(std::string_view text) {
  if (text == "accuracy") return CvMetric::accuracy;
  if (text == "auc") return CvMetric::auc;
  throw ConfigError("unknown cv metric '" + std::string(text) + "'");
}

namespace {

double score_fold(const forest::ForestModel& model, const Matrix& X_val,
                  const std::vector<int>& y_val, CvMetric metric) {
  if (metric == CvMetric::auc)
    return metrics::roc_auc(y_val, forest::predict_proba_rows(model, X_val)).auc;
  const auto c = metrics::confusion(y_val, forest::predict_rows(model, X_val));
  return metrics::classification_metrics(c).accuracy;
}

}  // namespace

CVResult grid_search(const Matrix& X, const std::vector<int>& y, const GridSpec& grid,
                     const FoldPlan& folds,
                     const std::optional<resample::SmoteConfig>& smote_cfg,
                     const forest::ForestConfig& base, CvMetric metric) {
  grid.validate();
  if (folds.assignment.size() != y.size() || y.size() != X.rows())
    throw DataError("grid_search: fold plan does not match the data");
  const int k = folds.k;

  // Fold training sets are identical for every cell, so build them (and apply
  // any oversampling) once up front.
  struct FoldData {
    Matrix X_train;
    std::vector<int> y_train;
    Matrix X_val;
    std::vector<int> y_val;
  };
  std::vector<FoldData> fold_data(static_cast<std::size_t>(k));
  CVResult result;
  result.metric = metric;
  if (smote_cfg) result.fold_smote_audit.resize(static_cast<std::size_t>(k));
  for (int f = 0; f < k; ++f) {
    auto& data = fold_data[static_cast<std::size_t>(f)];
    const auto train_rows = folds.training_rows(f);
    const auto val_rows = folds.held_out_rows(f);
    data.X_train = X.select_rows(train_rows);
    data.X_val = X.select_rows(val_rows);
    for (std::size_t r : train_rows) data.y_train.push_back(y[r]);
    for (std::size_t r : val_rows) data.y_val.push_back(y[r]);
    if (smote_cfg) {
      resample::SmoteConfig cfg = *smote_cfg;
      cfg.seed = derive_seed(folds.seed, "cv_smote", static_cast<std::uint64_t>(f));
      auto augmented = resample::smote(data.X_train, data.y_train, cfg);
      auto& audit = result.fold_smote_audit[static_cast<std::size_t>(f)];
      audit.reserve(augmented.provenance.size());
      for (const auto& p : augmented.provenance)
        audit.push_back({train_rows[p.base_row], train_rows[p.neighbor_row], p.interp});
      data.X_train = std::move(augmented.X);
      data.y_train = std::move(augmented.y);
    }
  }

  const std::size_t n_cells = grid.size();
  result.cells.resize(n_cells);
  for (std::size_t cell = 0; cell < n_cells; ++cell) {
    CellResult& out = result.cells[cell];
    out.config = grid.cell(cell, base);
    out.fold_scores.resize(static_cast<std::size_t>(k));
    double sum = 0.0;
    for (int f = 0; f < k; ++f) {
      const auto& data = fold_data[static_cast<std::size_t>(f)];
      forest::ForestConfig cfg = out.config;
      cfg.seed = derive_seed(folds.seed, "cv_forest",
                             cell * static_cast<std::uint64_t>(k) + static_cast<std::uint64_t>(f));
      double score;
      try {
        const auto model = forest::fit_forest(data.X_train, data.y_train, cfg);
        score = score_fold(model, data.X_val, data.y_val, metric);
      } catch (const Error& e) {
        throw StageError("grid_search cell " + std::to_string(cell) + " fold " +
                             std::to_string(f),
                         e.what());
      }
      out.fold_scores[static_cast<std::size_t>(f)] = score;
      sum += score;
    }
    out.mean_score = sum / static_cast<double>(k);
    if (cell > 0 && out.mean_score > result.cells[result.best_index].mean_score)
      result.best_index = cell;
  }
  result.ranking.resize(n_cells);
  for (std::size_t i = 0; i < n_cells; ++i) result.ranking[i] = i;
  std::stable_sort(result.ranking.begin(), result.ranking.end(), [&](std::size_t a, std::size_t b) {
    return result.cells[a].mean_score > result.cells[b].mean_score;
  });
  return result;
}

void write_cv_csv(std::ostream& out, const CVResult& result) {
  const std::size_t k =
      result.cells.empty() ? 0 : result.cells.front().fold_scores.size();
  out << "n_trees,max_depth,min_samples_split,features_per_split";
  for (std::size_t f = 0; f < k; ++f) out << ",fold_" << f;
  out << ",mean\n";
  for (const CellResult& cell : result.cells) {
    out << cell.config.n_trees << ',' << cell.config.max_depth << ','
        << cell.config.min_samples_split << ',' << to_string(cell.config.features_per_split);
    for (double s : cell.fold_scores) out << ',' << format_double(s);
    out << ',' << format_double(cell.mean_score) << '\n';
  }
}

}  // namespace tabrisk::tuning
