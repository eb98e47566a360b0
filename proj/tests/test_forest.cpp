#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "doctest.h"
#include "tabrisk/common.hpp"
#include "tabrisk/forest.hpp"
#include "tabrisk/rng.hpp"

using namespace tabrisk;
using namespace tabrisk::forest;

namespace {

constexpr double kTight = 1e-12;

Matrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  Matrix m;
  for (const auto& r : rows) m.append_row(r);
  return m;
}

double gini_of(std::uint64_t c0, std::uint64_t c1) {
  const double n = static_cast<double>(c0 + c1);
  if (n == 0.0) return 0.0;
  const double p0 = static_cast<double>(c0) / n;
  const double p1 = static_cast<double>(c1) / n;
  return 1.0 - (p0 * p0 + p1 * p1);
}

// Exact integer test that a split strictly reduces weighted Gini impurity,
// written independently of the library with the same cross-multiplication.
bool oracle_positive_decrease(std::uint64_t l0, std::uint64_t l1, std::uint64_t r0,
                              std::uint64_t r1) {
  using wide = unsigned __int128;
  const wide nl = l0 + l1;
  const wide nr = r0 + r1;
  const wide n = nl + nr;
  const wide left = wide(l0) * l0 + wide(l1) * l1;
  const wide right = wide(r0) * r0 + wide(r1) * r1;
  const wide total = wide(l0 + r0) * (l0 + r0) + wide(l1 + r1) * (l1 + r1);
  return n * nr * left + n * nl * right > nl * nr * total;
}

struct OracleSplit {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  std::uint64_t l0 = 0;
  std::uint64_t l1 = 0;
};

// Exhaustive best-split search over every feature and every boundary between
// distinct sorted values. Scores with the children purity sum and keeps the
// first maximum in ascending (feature, threshold) order, then applies the
// exact positivity gate.
OracleSplit oracle_best_split(const Matrix& X, const std::vector<int>& y,
                              std::uint64_t min_leaf) {
  std::uint64_t c0 = 0;
  std::uint64_t c1 = 0;
  for (int label : y) label == 0 ? ++c0 : ++c1;
  const std::size_t n = X.rows();
  OracleSplit best;
  double best_score = 0.0;
  for (std::size_t j = 0; j < X.cols(); ++j) {
    std::vector<std::pair<double, int>> vals(n);
    for (std::size_t i = 0; i < n; ++i) vals[i] = {X(i, j), y[i]};
    std::sort(vals.begin(), vals.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    std::uint64_t l0 = 0;
    std::uint64_t l1 = 0;
    for (std::size_t i = 0; i + 1 < n; ++i) {
      vals[i].second == 0 ? ++l0 : ++l1;
      const double lo = vals[i].first;
      const double hi = vals[i + 1].first;
      if (!(lo < hi)) continue;
      const std::uint64_t nl = l0 + l1;
      const std::uint64_t nr = n - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const std::uint64_t r0 = c0 - l0;
      const std::uint64_t r1 = c1 - l1;
      const double score =
          (static_cast<double>(l0) * l0 + static_cast<double>(l1) * l1) /
              static_cast<double>(nl) +
          (static_cast<double>(r0) * r0 + static_cast<double>(r1) * r1) /
              static_cast<double>(nr);
      if (!best.found || score > best_score) {
        double threshold = lo + (hi - lo) * 0.5;
        if (!(threshold < hi)) threshold = lo;
        best = {true, j, threshold, l0, l1};
        best_score = score;
      }
    }
  }
  if (best.found &&
      !oracle_positive_decrease(best.l0, best.l1, c0 - best.l0, c1 - best.l1))
    best.found = false;
  return best;
}

ForestConfig stump_config() {
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.max_depth = 1;
  cfg.features_per_split = FeatureSubset::all_of();
  return cfg;
}

Tree leaf_tree(std::uint64_t c0, std::uint64_t c1) {
  TreeNode node;
  node.counts = {c0, c1};
  return Tree{{node}};
}

ForestModel manual_forest(std::vector<Tree> trees, std::size_t n_columns) {
  ForestModel m;
  m.trees = std::move(trees);
  m.config.n_trees = static_cast<int>(m.trees.size());
  for (std::size_t j = 0; j < n_columns; ++j)
    m.column_names.push_back("x" + std::to_string(j));
  m.bootstrap_indices.assign(m.trees.size(), {});
  return m;
}

struct RandomTask {
  Matrix X;
  std::vector<int> y;
};

RandomTask random_task(Rng& rng, std::size_t n, std::size_t p, bool coarse) {
  RandomTask task;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(p);
    for (std::size_t j = 0; j < p; ++j)
      row[j] = coarse ? std::floor(rng.uniform() * 4.0) : rng.uniform();
    task.X.append_row(row);
    task.y.push_back(rng.uniform() < 0.5 ? 1 : 0);
  }
  // Guarantee both classes so the root is not pure by construction.
  task.y[0] = 0;
  if (n > 1) task.y[1] = 1;
  return task;
}

}  // namespace

TEST_CASE("the root split agrees with an exhaustive oracle on random data") {
  Rng rng(424242);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + rng.below(39);
    const std::size_t p = 1 + rng.below(4);
    RandomTask task = random_task(rng, n, p, rep % 2 == 0);
    ForestConfig cfg = stump_config();
    cfg.min_samples_leaf = 1 + static_cast<int>(rng.below(3));
    const OracleSplit expected =
        oracle_best_split(task.X, task.y, static_cast<std::uint64_t>(cfg.min_samples_leaf));
    Rng tree_rng(0);
    Tree tree = fit_tree(task.X, task.y, cfg, tree_rng);
    if (!expected.found) {
      REQUIRE(tree.nodes.size() == 1);
      CHECK(tree.nodes[0].is_leaf());
      continue;
    }
    REQUIRE(tree.nodes.size() == 3);
    const TreeNode& root = tree.nodes[0];
    CHECK(root.feature == static_cast<std::int32_t>(expected.feature));
    CHECK(root.threshold == expected.threshold);
    const TreeNode& left = tree.nodes[static_cast<std::size_t>(root.left)];
    CHECK(left.counts[0] == expected.l0);
    CHECK(left.counts[1] == expected.l1);
  }
}

TEST_CASE("a two-row task splits at the midpoint into pure leaves") {
  Matrix X = matrix_from_rows({{0.0}, {1.0}});
  std::vector<int> y = {0, 1};
  ForestConfig cfg = stump_config();
  Rng rng(0);
  Tree tree = fit_tree(X, y, cfg, rng);
  REQUIRE(tree.nodes.size() == 3);
  CHECK(tree.nodes[0].feature == 0);
  CHECK(tree.nodes[0].threshold == 0.5);
  const TreeNode& left = tree.nodes[static_cast<std::size_t>(tree.nodes[0].left)];
  const TreeNode& right = tree.nodes[static_cast<std::size_t>(tree.nodes[0].right)];
  CHECK(left.counts == std::array<std::uint64_t, 2>{1, 0});
  CHECK(right.counts == std::array<std::uint64_t, 2>{0, 1});
}

TEST_CASE("pure nodes and too-small nodes become leaves") {
  Matrix X = matrix_from_rows({{0.0}, {1.0}, {2.0}});
  std::vector<int> pure = {1, 1, 1};
  ForestConfig cfg = stump_config();
  Rng rng(0);
  Tree tree = fit_tree(X, pure, cfg, rng);
  REQUIRE(tree.nodes.size() == 1);
  CHECK(tree.nodes[0].is_leaf());
  CHECK(tree.nodes[0].counts == std::array<std::uint64_t, 2>{0, 3});

  std::vector<int> mixed = {0, 1, 0};
  cfg.min_samples_split = 5;
  Tree small = fit_tree(X, mixed, cfg, rng);
  REQUIRE(small.nodes.size() == 1);
  CHECK(small.nodes[0].is_leaf());
}

TEST_CASE("split ties prefer the lower feature index and lower threshold") {
  // Two identical perfectly separating columns: the split must use column 0.
  Matrix X = matrix_from_rows({{0.0, 0.0}, {0.0, 0.0}, {1.0, 1.0}, {1.0, 1.0}});
  std::vector<int> y = {0, 0, 1, 1};
  ForestConfig cfg = stump_config();
  Rng rng(0);
  Tree tree = fit_tree(X, y, cfg, rng);
  REQUIRE(tree.nodes.size() == 3);
  CHECK(tree.nodes[0].feature == 0);

  // Single feature where thresholds 0.5 and 1.5 score identically.
  Matrix X2 = matrix_from_rows({{0.0}, {1.0}, {2.0}});
  std::vector<int> y2 = {0, 1, 0};
  Tree tree2 = fit_tree(X2, y2, cfg, rng);
  REQUIRE(tree2.nodes.size() == 3);
  CHECK(tree2.nodes[0].threshold == 0.5);
}

TEST_CASE("min_samples_leaf restricts the admissible thresholds") {
  Matrix X = matrix_from_rows({{0.0}, {1.0}, {2.0}, {3.0}});
  std::vector<int> y = {0, 1, 1, 1};
  ForestConfig cfg = stump_config();
  cfg.min_samples_leaf = 2;
  Rng rng(0);
  Tree tree = fit_tree(X, y, cfg, rng);
  REQUIRE(tree.nodes.size() == 3);
  // Only the middle boundary keeps two rows on each side.
  CHECK(tree.nodes[0].threshold == 1.5);
}

TEST_CASE("max_depth bounds every root-to-leaf path") {
  Rng rng(31);
  RandomTask task = random_task(rng, 64, 2, true);

  // Measures the deepest split-to-split chain; a single leaf has depth 0.
  const auto tree_depth = [](const Tree& tree) {
    std::vector<int> depth(tree.nodes.size(), 0);
    int deepest = 0;
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
      const TreeNode& node = tree.nodes[i];
      deepest = std::max(deepest, depth[i]);
      if (node.is_leaf()) continue;
      depth[static_cast<std::size_t>(node.left)] = depth[i] + 1;
      depth[static_cast<std::size_t>(node.right)] = depth[i] + 1;
    }
    return deepest;
  };

  ForestConfig cfg;
  cfg.features_per_split = FeatureSubset::all_of();
  Rng tree_rng(1);
  cfg.max_depth = 1;
  CHECK(tree_depth(fit_tree(task.X, task.y, cfg, tree_rng)) <= 1);
  cfg.max_depth = 3;
  CHECK(tree_depth(fit_tree(task.X, task.y, cfg, tree_rng)) <= 3);
  cfg.max_depth = 0;  // unlimited: growth continues past any small bound
  const Tree deep = fit_tree(task.X, task.y, cfg, tree_rng);
  CHECK(tree_depth(deep) > 1);
}

TEST_CASE("a fully grown tree memorizes distinct training rows") {
  Rng rng(88);
  Matrix X;
  std::vector<int> y;
  for (std::size_t i = 0; i < 200; ++i) {
    // Unique first coordinate guarantees the rows are separable.
    const std::vector<double> row = {static_cast<double>(i) / 200.0, rng.uniform(),
                                     rng.uniform()};
    X.append_row(row);
    y.push_back((i % 3 == 0) ? 1 : 0);
  }
  ForestConfig cfg;
  cfg.max_depth = 0;
  cfg.features_per_split = FeatureSubset::all_of();
  Rng tree_rng(9);
  Tree tree = fit_tree(X, y, cfg, tree_rng);
  for (std::size_t i = 0; i < X.rows(); ++i) CHECK(tree.vote(X.row(i)) == y[i]);
}

TEST_CASE("leaf votes and probabilities follow the training counts") {
  Tree mostly_positive = leaf_tree(1, 3);
  std::vector<double> x = {0.0};
  CHECK(mostly_positive.vote(x) == 1);
  CHECK(mostly_positive.proba(x) == 0.75);

  Tree quarter = leaf_tree(3, 1);
  CHECK(quarter.proba(x) == 0.25);
  CHECK(quarter.vote(x) == 0);

  Tree tied = leaf_tree(2, 2);
  CHECK(tied.vote(x) == 0);  // ties break toward the negative class
}

TEST_CASE("forest probability is the mean of per-tree leaf fractions") {
  ForestModel m = manual_forest({leaf_tree(0, 5), leaf_tree(0, 7), leaf_tree(9, 0)}, 1);
  std::vector<double> x = {0.0};
  CHECK(predict_proba(m, x) == doctest::Approx(2.0 / 3.0).epsilon(kTight));
}

TEST_CASE("forest prediction is a majority vote, not thresholded probability") {
  // Two trees barely vote positive, one votes hard negative: the vote says 1
  // while the mean probability says 0.4.
  ForestModel m = manual_forest({leaf_tree(2, 3), leaf_tree(2, 3), leaf_tree(5, 0)}, 1);
  std::vector<double> x = {0.0};
  CHECK(predict(m, x) == 1);
  CHECK(predict_proba(m, x) == doctest::Approx(0.4).epsilon(kTight));

  // Vote ties break toward 0 even when the probability is above one half.
  ForestModel tied = manual_forest({leaf_tree(0, 1), leaf_tree(1, 0)}, 1);
  CHECK(predict(tied, x) == 0);
  CHECK(predict_proba(tied, x) == 0.5);
}

TEST_CASE("forest predictions equal the recounted votes of their trees") {
  Rng rng(2718);
  RandomTask task = random_task(rng, 120, 4, false);
  ForestConfig cfg;
  cfg.n_trees = 25;
  cfg.max_depth = 4;
  cfg.seed = 555;
  ForestModel m = fit_forest(task.X, task.y, cfg);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> x(4);
    for (auto& v : x) v = rng.uniform() * 1.5 - 0.25;
    int votes1 = 0;
    double proba_sum = 0.0;
    for (const Tree& tree : m.trees) {
      votes1 += tree.vote(x);
      proba_sum += tree.proba(x);
    }
    const int expected = 2 * votes1 > cfg.n_trees ? 1 : 0;
    CHECK(predict(m, x) == expected);
    CHECK(predict_proba(m, x) ==
          doctest::Approx(proba_sum / cfg.n_trees).epsilon(kTight));
    const double p = predict_proba(m, x);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("a single-tree forest predicts exactly like its tree") {
  Rng rng(13);
  RandomTask task = random_task(rng, 60, 3, true);
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.seed = 7;
  ForestModel m = fit_forest(task.X, task.y, cfg);
  REQUIRE(m.trees.size() == 1);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> x(3);
    for (auto& v : x) v = rng.uniform() * 4.0;
    CHECK(predict(m, x) == m.trees[0].vote(x));
    CHECK(predict_proba(m, x) == m.trees[0].proba(x));
  }
}

TEST_CASE("bootstrap sampling is deterministic per tree seed") {
  Rng rng(21);
  RandomTask task = random_task(rng, 50, 3, false);
  ForestConfig cfg;
  cfg.n_trees = 5;
  cfg.seed = 99;
  ForestModel a = fit_forest(task.X, task.y, cfg);
  ForestModel b = fit_forest(task.X, task.y, cfg);
  REQUIRE(a.bootstrap_indices.size() == 5);
  CHECK(a.bootstrap_indices == b.bootstrap_indices);
  for (const auto& indices : a.bootstrap_indices) {
    CHECK(indices.size() == task.X.rows());
    for (std::size_t r : indices) CHECK(r < task.X.rows());
  }
  // Different trees draw from different streams.
  CHECK(a.bootstrap_indices[0] != a.bootstrap_indices[1]);
}

TEST_CASE("results do not depend on the thread count") {
  Rng rng(23);
  RandomTask task = random_task(rng, 100, 4, false);
  ForestConfig cfg;
  cfg.n_trees = 12;
  cfg.seed = 3131;
  std::string reference;
  for (int threads : {1, 2, 8}) {
    cfg.n_threads = threads;
    ForestModel m = fit_forest(task.X, task.y, cfg);
    m.config.n_threads = 1;  // normalize the echoed config before comparing
    std::ostringstream out;
    write_forest(out, m);
    if (reference.empty())
      reference = out.str();
    else
      CHECK(out.str() == reference);
  }
}

TEST_CASE("every recorded split strictly reduces weighted Gini impurity") {
  Rng rng(37);
  RandomTask task = random_task(rng, 150, 3, true);
  ForestConfig cfg;
  cfg.n_trees = 10;
  cfg.seed = 4;
  ForestModel m = fit_forest(task.X, task.y, cfg);
  std::size_t checked = 0;
  for (const Tree& tree : m.trees) {
    for (const TreeNode& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const auto& lc = tree.nodes[static_cast<std::size_t>(node.left)].counts;
      const auto& rc = tree.nodes[static_cast<std::size_t>(node.right)].counts;
      CHECK(oracle_positive_decrease(lc[0], lc[1], rc[0], rc[1]));
      CHECK(lc[0] + rc[0] == node.counts[0]);
      CHECK(lc[1] + rc[1] == node.counts[1]);
      ++checked;
    }
  }
  CHECK(checked > 0);
}

TEST_CASE("feature importance matches an independent recomputation") {
  Rng rng(41);
  RandomTask task = random_task(rng, 120, 4, true);
  ForestConfig cfg;
  cfg.n_trees = 8;
  cfg.seed = 11;
  ForestModel m = fit_forest(task.X, task.y, cfg);
  const std::vector<double> reported = feature_importance(m);

  std::vector<double> recomputed(m.n_columns(), 0.0);
  for (const Tree& tree : m.trees) {
    const double root_n =
        static_cast<double>(tree.nodes[0].counts[0] + tree.nodes[0].counts[1]);
    for (const TreeNode& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const auto& lc = tree.nodes[static_cast<std::size_t>(node.left)].counts;
      const auto& rc = tree.nodes[static_cast<std::size_t>(node.right)].counts;
      const double n = static_cast<double>(node.counts[0] + node.counts[1]);
      const double nl = static_cast<double>(lc[0] + lc[1]);
      const double nr = static_cast<double>(rc[0] + rc[1]);
      const double decrease = gini_of(node.counts[0], node.counts[1]) -
                              (nl / n) * gini_of(lc[0], lc[1]) -
                              (nr / n) * gini_of(rc[0], rc[1]);
      recomputed[static_cast<std::size_t>(node.feature)] += (n / root_n) * decrease;
    }
  }
  for (double& v : recomputed) v /= static_cast<double>(m.trees.size());
  double sum = 0.0;
  for (double v : recomputed) sum += v;
  if (sum > 0.0)
    for (double& v : recomputed) v /= sum;

  REQUIRE(reported.size() == recomputed.size());
  double total = 0.0;
  for (std::size_t j = 0; j < reported.size(); ++j) {
    CHECK(reported[j] == doctest::Approx(recomputed[j]).epsilon(kTight));
    total += reported[j];
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("importance concentrates on a feature that fully explains the labels") {
  // One split on column 2 separates the classes: all importance lands there.
  Matrix X = matrix_from_rows(
      {{0.3, 0.9, 0.0}, {0.7, 0.1, 0.0}, {0.2, 0.5, 1.0}, {0.9, 0.4, 1.0}});
  std::vector<int> y = {0, 0, 1, 1};
  ForestConfig cfg = stump_config();
  Rng rng(0);
  Tree tree = fit_tree(X, y, cfg, rng);
  ForestModel m = manual_forest({tree}, 3);
  const std::vector<double> imp = feature_importance(m);
  CHECK(imp[0] == 0.0);
  CHECK(imp[1] == 0.0);
  CHECK(imp[2] == doctest::Approx(1.0).epsilon(kTight));
}

TEST_CASE("a forest of single leaves has an all-zero unnormalized importance") {
  ForestModel m = manual_forest({leaf_tree(3, 1), leaf_tree(2, 2)}, 2);
  const std::vector<double> imp = feature_importance(m);
  CHECK(imp == std::vector<double>{0.0, 0.0});
}

TEST_CASE("importance ranks the signal feature above noise in most seeds") {
  Rng data_rng(10101);
  int hits = 0;
  for (int seed = 0; seed < 10; ++seed) {
    Matrix X;
    std::vector<int> y;
    for (std::size_t i = 0; i < 120; ++i) {
      const double signal = data_rng.uniform();
      const std::vector<double> row = {signal, data_rng.uniform(), data_rng.uniform()};
      X.append_row(row);
      y.push_back(signal > 0.5 ? 1 : 0);
    }
    ForestConfig cfg;
    cfg.n_trees = 20;
    cfg.seed = static_cast<std::uint64_t>(seed);
    ForestModel m = fit_forest(X, y, cfg);
    const std::vector<double> imp = feature_importance(m);
    if (imp[0] > imp[1] && imp[0] > imp[2]) ++hits;
  }
  CHECK(hits >= 9);
}

TEST_CASE("forests round trip through their text serialization bit-exactly") {
  Rng rng(47);
  RandomTask task = random_task(rng, 80, 3, false);
  ForestConfig cfg;
  cfg.n_trees = 6;
  cfg.max_depth = 5;
  cfg.seed = 1234;
  cfg.features_per_split = FeatureSubset::fixed_of(2);
  ForestModel m = fit_forest(task.X, task.y, cfg, {"alpha", "beta", "gamma"});
  std::ostringstream out;
  write_forest(out, m);
  std::istringstream in(out.str());
  ForestModel back = read_forest(in);
  CHECK(back.config == m.config);
  CHECK(back.column_names == m.column_names);
  CHECK(back.bootstrap_indices == m.bootstrap_indices);
  REQUIRE(back.trees.size() == m.trees.size());
  std::ostringstream again;
  write_forest(again, back);
  CHECK(again.str() == out.str());
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<double> x(3);
    for (auto& v : x) v = rng.uniform();
    CHECK(predict_proba(back, x) == predict_proba(m, x));
    CHECK(predict(back, x) == predict(m, x));
  }
}

TEST_CASE("reading a corrupted forest stream fails cleanly") {
  std::istringstream bad("bogus 1\n");
  CHECK_THROWS_AS(read_forest(bad), DataError);
  std::istringstream empty("");
  CHECK_THROWS_AS(read_forest(empty), DataError);
}

TEST_CASE("feature subset sizes resolve as documented") {
  CHECK(FeatureSubset::sqrt_of().resolve(9) == 3);
  CHECK(FeatureSubset::sqrt_of().resolve(10) == 3);
  CHECK(FeatureSubset::sqrt_of().resolve(1) == 1);
  CHECK(FeatureSubset::all_of().resolve(7) == 7);
  CHECK(FeatureSubset::fixed_of(3).resolve(7) == 3);
  CHECK(FeatureSubset::fixed_of(30).resolve(7) == 7);
  CHECK(to_string(FeatureSubset::sqrt_of()) == "sqrt");
  CHECK(to_string(FeatureSubset::all_of()) == "all");
  CHECK(to_string(FeatureSubset::fixed_of(4)) == "4");
  CHECK(feature_subset_from_string("sqrt") == FeatureSubset::sqrt_of());
  CHECK(feature_subset_from_string("all") == FeatureSubset::all_of());
  CHECK(feature_subset_from_string("4") == FeatureSubset::fixed_of(4));
  CHECK_THROWS_AS(feature_subset_from_string("banana"), ConfigError);
}

TEST_CASE("forest configuration and input validation") {
  ForestConfig cfg;
  cfg.n_trees = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.max_depth = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.min_samples_split = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.min_samples_leaf = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.n_threads = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.features_per_split = FeatureSubset::fixed_of(0);
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  CHECK_NOTHROW(cfg.validate());

  Matrix X = matrix_from_rows({{0.0}, {1.0}});
  CHECK_THROWS_AS(fit_forest(X, {0, 2}, cfg), DataError);
  CHECK_THROWS_AS(fit_forest(X, {0}, cfg), DataError);
  CHECK_THROWS_AS(fit_forest(Matrix{}, {}, cfg), DataError);

  ForestModel m = fit_forest(X, {0, 1}, cfg);
  std::vector<double> wide = {1.0, 2.0};
  CHECK_THROWS_AS(predict(m, wide), DataError);
  CHECK_THROWS_AS(fit_forest(X, {0, 1}, cfg, {"only_one_name_for_one_column", "extra"}),
                  ConfigError);
}
