#include "tabrisk/resample.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "tabrisk/rng.hpp"

namespace tabrisk::resample {

void SmoteConfig::validate() const {
  if (k_neighbors < 1) throw ConfigError("smote k_neighbors must be >= 1");
  if (!(target_ratio > 0.0 && target_ratio <= 1.0))
    throw ConfigError("smote target_ratio must lie in (0, 1]");
}

std::vector<std::vector<std::size_t>> knn_minority(const Matrix& X_min, int k) {
  const std::size_t n = X_min.rows();
  if (k < 1) throw ConfigError("smote k_neighbors must be >= 1");
  if (n < static_cast<std::size_t>(k) + 1)
    throw ConfigError("smote needs at least k_neighbors + 1 minority rows, got " +
                      std::to_string(n));
  std::vector<std::vector<std::size_t>> table(n);
  std::vector<std::pair<double, std::size_t>> dist;
  dist.reserve(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    dist.clear();
    const auto a = X_min.row(i);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const auto b = X_min.row(j);
      double d2 = 0.0;
      for (std::size_t c = 0; c < a.size(); ++c) {
        const double diff = a[c] - b[c];
        d2 += diff * diff;
      }
      dist.emplace_back(d2, j);
    }
    // pairs order by (distance, index), so equidistant rows resolve low-first
    std::sort(dist.begin(), dist.end());
    auto& neighbors = table[i];
    neighbors.reserve(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) neighbors.push_back(dist[static_cast<std::size_t>(c)].second);
  }
  return table;
}

SmoteResult smote(const Matrix& X, const std::vector<int>& y, const SmoteConfig& cfg) {
  cfg.validate();
  if (y.size() != X.rows()) throw DataError("smote: labels length does not match matrix rows");
  std::vector<std::size_t> rows_of[2];
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw DataError("smote: labels must be 0 or 1");
    rows_of[static_cast<std::size_t>(y[i])].push_back(i);
  }
  if (rows_of[0].empty() || rows_of[1].empty())
    throw DataError("smote: both classes must be present");

  // Fewer rows wins; at equal counts class 1 is treated as the minority.
  const int minority = rows_of[1].size() <= rows_of[0].size() ? 1 : 0;
  const auto& min_rows = rows_of[static_cast<std::size_t>(minority)];
  const auto& maj_rows = rows_of[static_cast<std::size_t>(1 - minority)];
  if (min_rows.size() < static_cast<std::size_t>(cfg.k_neighbors) + 1)
    throw ConfigError("smote needs at least k_neighbors + 1 minority rows, got " +
                      std::to_string(min_rows.size()));

  SmoteResult result;
  result.minority_class = minority;
  result.X = X;
  result.y = y;

  const auto target =
      static_cast<std::size_t>(std::floor(cfg.target_ratio * static_cast<double>(maj_rows.size())));
  if (target <= min_rows.size()) return result;  // ratio already satisfied
  const std::size_t n_synth = target - min_rows.size();

  Matrix X_min(min_rows.size(), X.cols());
  for (std::size_t i = 0; i < min_rows.size(); ++i) {
    const auto src = X.row(min_rows[i]);
    std::copy(src.begin(), src.end(), X_min.row(i).begin());
  }
  const auto neighbors = knn_minority(X_min, cfg.k_neighbors);

  Rng rng(cfg.seed);
  std::vector<double> synthetic(X.cols());
  result.provenance.reserve(n_synth);
  for (std::size_t s = 0; s < n_synth; ++s) {
    const std::size_t base_local = s % min_rows.size();
    const std::size_t neighbor_local =
        neighbors[base_local][rng.below(static_cast<std::uint64_t>(cfg.k_neighbors))];
    const double interp = rng.uniform();
    const auto base = X_min.row(base_local);
    const auto neighbor = X_min.row(neighbor_local);
    for (std::size_t c = 0; c < synthetic.size(); ++c)
      synthetic[c] = base[c] + interp * (neighbor[c] - base[c]);
    result.X.append_row(synthetic);
    result.y.push_back(minority);
    result.provenance.push_back({min_rows[base_local], min_rows[neighbor_local], interp});
  }
  return result;
}

void write_smote_audit(std::ostream& out, const std::vector<SmoteProvenance>& provenance) {
  out << "base_row,neighbor_row,interp\n";
  for (const auto& p : provenance)
    out << p.base_row << ',' << p.neighbor_row << ',' << format_double(p.interp) << '\n';
}

}  // namespace tabrisk::resample
