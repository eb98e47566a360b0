#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tabrisk/common.hpp"
#include "tabrisk/forest.hpp"
#include "tabrisk/resample.hpp"

namespace tabrisk::tuning {

struct FoldPlan {
  int k = 5;
  std::vector<int> assignment;  // per-row fold index in [0, k)
  std::uint64_t seed = 0;

  std::vector<std::size_t> held_out_rows(int fold) const;
  std::vector<std::size_t> training_rows(int fold) const;
};

// Shuffles each class with the seed, then deals all rows through one running
// round-robin pointer (class 0 first), so per-class counts stay within one of
// ideal and fold sizes differ by at most one.
FoldPlan stratified_kfold(const std::vector<int>& y, int k, std::uint64_t seed);

struct GridSpec {
  std::vector<int> n_trees{50, 100};
  std::vector<int> max_depth{5, 10};
  std::vector<int> min_samples_split{2, 5};
  std::vector<forest::FeatureSubset> features_per_split{forest::FeatureSubset::sqrt_of()};

  std::size_t size() const;
  // Row-major enumeration: n_trees varies slowest, features_per_split fastest.
  forest::ForestConfig cell(std::size_t index, const forest::ForestConfig& base) const;
  void validate() const;
};

enum class CvMetric { accuracy, auc };
std::string to_string(CvMetric metric);
CvMetric cv_metric_from_string(std::string_view text);

struct CellResult {
  forest::ForestConfig config;
  std::vector<double> fold_scores;
  double mean_score = 0.0;
};

struct CVResult {
  std::vector<CellResult> cells;  // grid enumeration order
  std::size_t best_index = 0;
  std::vector<std::size_t> ranking;  // cell indices, best score first, ties by enumeration
  CvMetric metric = CvMetric::accuracy;
  // Per-fold oversampling provenance, remapped to the full matrix's row
  // indices (the same augmented folds are shared by every cell).
  std::vector<std::vector<resample::SmoteProvenance>> fold_smote_audit;

  const CellResult& best() const { return cells[best_index]; }
};

// For every cell and fold: fit a forest on the other k-1 folds (oversampled
// there only, when configured) and score the held-out fold; cells rank by
// mean score with ties resolved toward earlier enumeration.
CVResult grid_search(const Matrix& X, const std::vector<int>& y, const GridSpec& grid,
                     const FoldPlan& folds,
                     const std::optional<resample::SmoteConfig>& smote_cfg,
                     const forest::ForestConfig& base,
                     CvMetric metric = CvMetric::accuracy);

// One row per cell: hyperparameters, per-fold scores, mean.
void write_cv_csv(std::ostream& out, const CVResult& result);

}  // namespace tabrisk::tuning
