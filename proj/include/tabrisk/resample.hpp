#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "tabrisk/common.hpp"

namespace tabrisk::resample {

struct SmoteConfig {
  int k_neighbors = 5;
  double target_ratio = 1.0;  // desired minority/majority count ratio, in (0, 1]
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError on out-of-range fields
};

// One record per synthetic row: indices refer to rows of the matrix passed to
// smote(), so callers can trace every interpolation back to its sources.
struct SmoteProvenance {
  std::size_t base_row;
  std::size_t neighbor_row;
  double interp;
};

struct SmoteResult {
  Matrix X;            // original rows first and unchanged, synthetic rows appended
  std::vector<int> y;  // synthetic labels = minority class
  std::vector<SmoteProvenance> provenance;
  int minority_class = 0;
};

// For each row of X_min, the k nearest other rows by Euclidean distance;
// distance ties break toward the lower row index.
std::vector<std::vector<std::size_t>> knn_minority(const Matrix& X_min, int k);

// Appends floor(target_ratio * majority) - minority interpolated rows, each
// base + interp * (neighbor - base) with the base cycled round-robin over
// minority rows in index order, the neighbor drawn uniformly from the base's
// k-NN list, and interp drawn uniformly from [0, 1].
SmoteResult smote(const Matrix& X, const std::vector<int>& y, const SmoteConfig& cfg);

// Audit CSV: one row per synthetic sample (base, neighbor, interp).
void write_smote_audit(std::ostream& out, const std::vector<SmoteProvenance>& provenance);

}  // namespace tabrisk::resample
