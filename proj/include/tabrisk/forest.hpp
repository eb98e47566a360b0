#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tabrisk/common.hpp"
#include "tabrisk/rng.hpp"

namespace tabrisk::forest {

// How many candidate features each split draws: floor(sqrt(p)), all p, or a
// fixed count clamped to [1, p].
struct FeatureSubset {
  enum class Mode { sqrt_of_p, all, fixed };
  Mode mode = Mode::sqrt_of_p;
  int count = 0;  // used when mode == fixed

  static FeatureSubset sqrt_of() { return {Mode::sqrt_of_p, 0}; }
  static FeatureSubset all_of() { return {Mode::all, 0}; }
  static FeatureSubset fixed_of(int count) { return {Mode::fixed, count}; }

  std::size_t resolve(std::size_t p) const;
  bool operator==(const FeatureSubset&) const = default;
};

std::string to_string(const FeatureSubset& subset);
FeatureSubset feature_subset_from_string(std::string_view text);

struct ForestConfig {
  int n_trees = 50;
  int max_depth = 10;  // 0 means unlimited
  int min_samples_split = 2;
  int min_samples_leaf = 1;
  FeatureSubset features_per_split = FeatureSubset::sqrt_of();
  std::uint64_t seed = 0;
  int n_threads = 1;  // > 0 fixed, 0 = hardware concurrency; never affects results

  void validate() const;  // throws ConfigError on out-of-range fields
  bool operator==(const ForestConfig&) const = default;
};

// Flattened tree node: children are indices into the owning tree's node
// vector, feature < 0 marks a leaf. Every node keeps its training class
// counts so importance and leaf fractions can be recomputed after reload.
struct TreeNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::array<std::uint64_t, 2> counts = {0, 0};

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::size_t leaf_for(std::span<const double> x) const;
  int vote(std::span<const double> x) const;      // leaf majority, tie -> 0
  double proba(std::span<const double> x) const;  // leaf positive fraction
};

struct ForestModel {
  std::vector<Tree> trees;
  ForestConfig config;
  std::vector<std::vector<std::size_t>> bootstrap_indices;  // one list of n rows per tree
  std::vector<std::string> column_names;

  std::size_t n_columns() const { return column_names.size(); }
};

// Single CART tree on the given rows as-is (no bootstrap). Splits greedily by
// Gini impurity decrease over midpoint thresholds; ties prefer the lower
// feature index, then the lower threshold.
Tree fit_tree(const Matrix& X, const std::vector<int>& y, const ForestConfig& cfg, Rng& rng);

// Bagged ensemble: each tree trains on its own n-row bootstrap with an RNG
// stream derived from (cfg.seed, tree index), so results do not depend on
// cfg.n_threads or scheduling.
ForestModel fit_forest(const Matrix& X, const std::vector<int>& y, const ForestConfig& cfg,
                       const std::vector<std::string>& column_names = {});

// Mean over trees of the leaf positive-class fraction.
double predict_proba(const ForestModel& m, std::span<const double> x);

// Hard majority vote over per-tree leaf classes; every tie breaks toward 0.
int predict(const ForestModel& m, std::span<const double> x);

std::vector<double> predict_proba_rows(const ForestModel& m, const Matrix& X);
std::vector<int> predict_rows(const ForestModel& m, const Matrix& X);

// Mean over trees of per-column (node weight x Gini decrease), normalized to
// sum to 1 when any column scores above zero.
std::vector<double> feature_importance(const ForestModel& m);

// Structured text round-trip; doubles survive bit-exactly.
void write_forest(std::ostream& out, const ForestModel& m);
ForestModel read_forest(std::istream& in);

}  // namespace tabrisk::forest
