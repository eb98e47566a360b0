#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "tabrisk/common.hpp"
#include "tabrisk/resample.hpp"
#include "tabrisk/rng.hpp"

using namespace tabrisk;
using namespace tabrisk::resample;

namespace {

constexpr double kColinearMargin = 1e-12;

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

// Independent k-NN oracle: full distance table + stable sort on
// (squared distance, index) pairs.
std::vector<std::size_t> knn_oracle(const Matrix& X, std::size_t query, int k) {
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    if (i == query) continue;
    double d2 = 0.0;
    for (std::size_t j = 0; j < X.cols(); ++j) {
      const double diff = X(i, j) - X(query, j);
      d2 += diff * diff;
    }
    dist.emplace_back(d2, i);
  }
  std::sort(dist.begin(), dist.end());
  std::vector<std::size_t> out;
  for (int i = 0; i < k && i < static_cast<int>(dist.size()); ++i)
    out.push_back(dist[i].second);
  return out;
}

// Least-squares interpolation parameter of s relative to the segment from b
// to m, with the residual of the reconstruction.
struct SegmentFit {
  double t = 0.0;
  double residual = 0.0;
};

SegmentFit fit_segment(std::span<const double> b, std::span<const double> m,
                       std::span<const double> s) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    const double d = m[j] - b[j];
    num += (s[j] - b[j]) * d;
    den += d * d;
  }
  SegmentFit fit;
  fit.t = den > 0.0 ? num / den : 0.0;
  for (std::size_t j = 0; j < b.size(); ++j) {
    const double rebuilt = b[j] + fit.t * (m[j] - b[j]);
    fit.residual = std::max(fit.residual, std::fabs(s[j] - rebuilt));
  }
  return fit;
}

struct RandomProblem {
  Matrix X;
  std::vector<int> y;
  std::size_t n_minority = 0;
  std::size_t n_majority = 0;
};

RandomProblem random_problem(Rng& rng, std::size_t n_min, std::size_t n_maj,
                             std::size_t p) {
  RandomProblem prob;
  for (std::size_t i = 0; i < n_min + n_maj; ++i) {
    std::vector<double> row(p);
    const bool minority = i < n_min;
    for (std::size_t j = 0; j < p; ++j)
      row[j] = rng.normal() + (minority ? 2.0 : -2.0);
    prob.X.append_row(row);
    prob.y.push_back(minority ? 1 : 0);
  }
  prob.n_minority = n_min;
  prob.n_majority = n_maj;
  return prob;
}

}  // namespace

TEST_CASE("nearest neighbours match the worked example") {
  Matrix X = matrix_from_rows({{0.0, 0.0}, {1.0, 0.0}, {5.0, 0.0}});
  auto nn = knn_minority(X, 1);
  REQUIRE(nn.size() == 3);
  CHECK(nn[0] == std::vector<std::size_t>{1});
  CHECK(nn[1] == std::vector<std::size_t>{0});
  CHECK(nn[2] == std::vector<std::size_t>{1});
}

TEST_CASE("nearest neighbour distance ties break toward the lower index") {
  Matrix X = matrix_from_rows({{0.0}, {1.0}, {1.0}, {1.0}});
  auto nn = knn_minority(X, 2);
  CHECK(nn[0] == std::vector<std::size_t>{1, 2});
  CHECK(nn[3] == std::vector<std::size_t>{1, 2});
}

TEST_CASE("k equal to the row count minus one returns every other row") {
  Matrix X = matrix_from_rows({{0.0}, {3.0}, {1.0}, {7.0}});
  auto nn = knn_minority(X, 3);
  for (std::size_t i = 0; i < 4; ++i) {
    std::set<std::size_t> others(nn[i].begin(), nn[i].end());
    CHECK(others.size() == 3);
    CHECK(others.count(i) == 0);
  }
}

TEST_CASE("nearest neighbours agree with a brute-force oracle") {
  Rng rng(606);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 5 + rng.below(30);
    const std::size_t p = 1 + rng.below(5);
    Matrix X;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> row(p);
      // Coarse grid values force plenty of exact distance ties.
      for (std::size_t j = 0; j < p; ++j) row[j] = std::floor(rng.uniform() * 4.0);
      X.append_row(row);
    }
    const int k = 1 + static_cast<int>(rng.below(n - 1));
    auto nn = knn_minority(X, k);
    for (std::size_t i = 0; i < n; ++i) CHECK(nn[i] == knn_oracle(X, i, k));
  }
}

TEST_CASE("knn requires more minority rows than neighbours") {
  Matrix X = matrix_from_rows({{0.0}, {1.0}, {2.0}});
  CHECK_THROWS_AS(knn_minority(X, 3), ConfigError);
  CHECK_NOTHROW(knn_minority(X, 2));
}

TEST_CASE("smote interpolates strictly between base and neighbour") {
  // Two minority points with k=1: every synthetic row must sit on the single
  // segment joining them.
  Matrix X = matrix_from_rows({{0.0, 0.0}, {2.0, 2.0},
                               {10.0, 10.0}, {11.0, 10.0}, {12.0, 10.0},
                               {13.0, 10.0}, {14.0, 10.0}, {15.0, 10.0}});
  std::vector<int> y = {1, 1, 0, 0, 0, 0, 0, 0};
  SmoteConfig cfg;
  cfg.k_neighbors = 1;
  cfg.target_ratio = 1.0;
  cfg.seed = 5;
  SmoteResult result = smote(X, y, cfg);
  CHECK(result.minority_class == 1);
  REQUIRE(result.X.rows() == 12);  // 6 majority + 2 minority + 4 synthetic
  REQUIRE(result.provenance.size() == 4);
  for (std::size_t s = 0; s < result.provenance.size(); ++s) {
    const SmoteProvenance& prov = result.provenance[s];
    CHECK((prov.base_row == 0 || prov.base_row == 1));
    CHECK((prov.neighbor_row == 0 || prov.neighbor_row == 1));
    CHECK(prov.base_row != prov.neighbor_row);
    CHECK(prov.interp >= 0.0);
    CHECK(prov.interp <= 1.0);
    const std::size_t row = 8 + s;
    for (std::size_t j = 0; j < 2; ++j) {
      const double expected =
          X(prov.base_row, j) +
          prov.interp * (X(prov.neighbor_row, j) - X(prov.base_row, j));
      CHECK(result.X(row, j) == doctest::Approx(expected).epsilon(kColinearMargin));
    }
    CHECK(result.y[row] == 1);
  }
  // Bases cycle round-robin over minority rows in index order.
  CHECK(result.provenance[0].base_row == 0);
  CHECK(result.provenance[1].base_row == 1);
  CHECK(result.provenance[2].base_row == 0);
  CHECK(result.provenance[3].base_row == 1);
}

TEST_CASE("smote reaches the requested ratio with floor rounding") {
  Rng rng(42);
  RandomProblem prob = random_problem(rng, 4, 10, 3);
  SmoteConfig cfg;
  cfg.k_neighbors = 3;
  cfg.target_ratio = 1.0;
  cfg.seed = 9;
  SmoteResult result = smote(prob.X, prob.y, cfg);
  CHECK(result.provenance.size() == 6);  // floor(1.0 * 10) - 4
  CHECK(result.X.rows() == 20);

  cfg.target_ratio = 0.5;
  RandomProblem prob2 = random_problem(rng, 4, 11, 3);
  SmoteResult half = smote(prob2.X, prob2.y, cfg);
  CHECK(half.provenance.size() == 1);  // floor(0.5 * 11) = 5 minority target

  // Already satisfied: no synthetic rows, inputs returned unchanged.
  cfg.target_ratio = 0.25;
  SmoteResult none = smote(prob2.X, prob2.y, cfg);
  CHECK(none.provenance.empty());
  CHECK(none.X.rows() == prob2.X.rows());
  CHECK(none.y == prob2.y);
}

TEST_CASE("smote leaves the original rows bit-identical and first") {
  Rng rng(77);
  RandomProblem prob = random_problem(rng, 6, 14, 4);
  SmoteConfig cfg;
  cfg.k_neighbors = 5;
  cfg.seed = 3;
  SmoteResult result = smote(prob.X, prob.y, cfg);
  REQUIRE(result.X.rows() >= prob.X.rows());
  for (std::size_t i = 0; i < prob.X.rows(); ++i) {
    CHECK(result.y[i] == prob.y[i]);
    for (std::size_t j = 0; j < prob.X.cols(); ++j)
      CHECK(result.X(i, j) == prob.X(i, j));
  }
}

TEST_CASE("synthetic points lie on minority-to-minority segments") {
  Rng rng(1234);
  std::size_t total_synthetic = 0;
  while (total_synthetic < 1000) {
    const std::size_t n_min = 4 + rng.below(12);
    const std::size_t n_maj = n_min + 5 + rng.below(40);
    const std::size_t p = 2 + rng.below(5);
    RandomProblem prob = random_problem(rng, n_min, n_maj, p);
    SmoteConfig cfg;
    cfg.k_neighbors = 1 + static_cast<int>(rng.below(n_min - 1));
    cfg.target_ratio = 0.5 + 0.5 * rng.uniform();
    cfg.seed = rng.next();
    SmoteResult result = smote(prob.X, prob.y, cfg);
    std::vector<std::size_t> minority_rows;
    for (std::size_t i = 0; i < prob.y.size(); ++i)
      if (prob.y[i] == 1) minority_rows.push_back(i);
    std::set<std::size_t> minority_set(minority_rows.begin(), minority_rows.end());
    auto nn = knn_minority(prob.X.select_rows(minority_rows), cfg.k_neighbors);

    for (std::size_t s = 0; s < result.provenance.size(); ++s) {
      const SmoteProvenance& prov = result.provenance[s];
      // Base and neighbour are minority rows of the original matrix.
      REQUIRE(minority_set.count(prov.base_row) == 1);
      REQUIRE(minority_set.count(prov.neighbor_row) == 1);
      // The neighbour really is one of the base's k nearest minority rows.
      const std::size_t base_local = static_cast<std::size_t>(
          std::find(minority_rows.begin(), minority_rows.end(), prov.base_row) -
          minority_rows.begin());
      bool neighbour_listed = false;
      for (std::size_t cand : nn[base_local])
        neighbour_listed = neighbour_listed || minority_rows[cand] == prov.neighbor_row;
      CHECK(neighbour_listed);
      // Colinearity: the synthetic row reconstructs from base + t * direction.
      const std::size_t row = prob.X.rows() + s;
      const SegmentFit fit =
          fit_segment(prob.X.row(prov.base_row), prob.X.row(prov.neighbor_row),
                      result.X.row(row));
      CHECK(fit.residual < kColinearMargin);
      CHECK(fit.t >= -kColinearMargin);
      CHECK(fit.t <= 1.0 + kColinearMargin);
      ++total_synthetic;
    }
  }
  CHECK(total_synthetic >= 1000);
}

TEST_CASE("smote is deterministic in the seed") {
  Rng rng(55);
  RandomProblem prob = random_problem(rng, 5, 12, 3);
  SmoteConfig cfg;
  cfg.k_neighbors = 4;
  cfg.seed = 321;
  SmoteResult a = smote(prob.X, prob.y, cfg);
  SmoteResult b = smote(prob.X, prob.y, cfg);
  REQUIRE(a.X.rows() == b.X.rows());
  for (std::size_t i = 0; i < a.X.rows(); ++i)
    for (std::size_t j = 0; j < a.X.cols(); ++j) CHECK(a.X(i, j) == b.X(i, j));
  REQUIRE(a.provenance.size() == b.provenance.size());
  for (std::size_t s = 0; s < a.provenance.size(); ++s) {
    CHECK(a.provenance[s].base_row == b.provenance[s].base_row);
    CHECK(a.provenance[s].neighbor_row == b.provenance[s].neighbor_row);
    CHECK(a.provenance[s].interp == b.provenance[s].interp);
  }
}

TEST_CASE("equal class counts treat class 1 as the minority") {
  Rng rng(66);
  RandomProblem prob = random_problem(rng, 6, 6, 2);
  SmoteConfig cfg;
  cfg.k_neighbors = 2;
  cfg.seed = 1;
  SmoteResult result = smote(prob.X, prob.y, cfg);
  CHECK(result.minority_class == 1);
  CHECK(result.provenance.empty());  // already at ratio 1.0
}

TEST_CASE("smote validates its configuration and inputs") {
  SmoteConfig cfg;
  cfg.k_neighbors = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.k_neighbors = 3;
  cfg.target_ratio = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.target_ratio = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.target_ratio = 1.0;
  CHECK_NOTHROW(cfg.validate());

  Rng rng(8);
  RandomProblem prob = random_problem(rng, 3, 10, 2);
  cfg.k_neighbors = 3;  // needs at least 4 minority rows
  CHECK_THROWS_AS(smote(prob.X, prob.y, cfg), ConfigError);

  std::vector<int> single_class(prob.y.size(), 0);
  cfg.k_neighbors = 2;
  CHECK_THROWS_AS(smote(prob.X, single_class, cfg), DataError);

  std::vector<int> bad_labels = prob.y;
  bad_labels[0] = 2;
  CHECK_THROWS_AS(smote(prob.X, bad_labels, cfg), DataError);

  std::vector<int> short_labels(prob.X.rows() - 1, 0);
  CHECK_THROWS_AS(smote(prob.X, short_labels, cfg), DataError);
}

TEST_CASE("smote audit csv lists one row per synthetic sample") {
  std::vector<SmoteProvenance> prov = {{0, 2, 0.5}, {1, 0, 0.25}};
  std::ostringstream out;
  write_smote_audit(out, prov);
  std::istringstream in(out.str());
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "base_row,neighbor_row,interp");
  REQUIRE(std::getline(in, line));
  CHECK(line == "0,2,0.5");
  REQUIRE(std::getline(in, line));
  CHECK(line == "1,0,0.25");
  CHECK_FALSE(std::getline(in, line));
}
