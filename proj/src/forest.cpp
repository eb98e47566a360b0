#include "tabrisk/forest.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "tabrisk/parallel.hpp"

namespace tabrisk::forest {
namespace {

struct ValueLabel {
  double value;
  int label;
  bool operator<(const ValueLabel& other) const { return value < other.value; }
};

double gini(std::uint64_t c0, std::uint64_t c1) {
  const double n = static_cast<double>(c0 + c1);
  if (n == 0.0) return 0.0;
  const double p0 = static_cast<double>(c0) / n;
  const double p1 = static_cast<double>(c1) / n;
  return 1.0 - (p0 * p0 + p1 * p1);
}

// Exact integer test that a split strictly reduces weighted Gini impurity:
// sum_child (c0^2+c1^2)/n_child > (C0^2+C1^2)/n, cross-multiplied to avoid
// accepting splits whose true decrease is zero but rounds positive.
bool strictly_positive_decrease(std::uint64_t l0, std::uint64_t l1, std::uint64_t r0,
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

struct BestSplit {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double score = 0.0;  // sum of (c0^2+c1^2)/n over children; larger is purer
  std::uint64_t l0 = 0, l1 = 0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Matrix& X, const std::vector<int>& y, const ForestConfig& cfg, Rng& rng)
      : X_(X), y_(y), cfg_(cfg), rng_(rng), n_candidates_(cfg.features_per_split.resolve(X.cols())) {
    rows_.resize(X.rows());
    for (std::size_t i = 0; i < rows_.size(); ++i) rows_[i] = i;
    scratch_.resize(X.rows());
    nodes_.reserve(64);
  }

  Tree build() {
    grow(0, rows_.size(), 0);
    return Tree{std::move(nodes_)};
  }

 private:
  std::int32_t make_leaf(std::uint64_t c0, std::uint64_t c1) {
    TreeNode leaf;
    leaf.counts = {c0, c1};
    nodes_.push_back(leaf);
    return static_cast<std::int32_t>(nodes_.size() - 1);
  }

  BestSplit find_best_split(std::size_t begin, std::size_t end, std::uint64_t c0,
                            std::uint64_t c1) {
    BestSplit best;
    const std::size_t n = end - begin;
    std::vector<std::size_t> candidates;
    if (n_candidates_ >= X_.cols()) {
      candidates.resize(X_.cols());
      for (std::size_t j = 0; j < candidates.size(); ++j) candidates[j] = j;
    } else {
      candidates = rng_.sample_without_replacement(X_.cols(), n_candidates_);
    }
    const auto min_leaf = static_cast<std::uint64_t>(cfg_.min_samples_leaf);
    for (std::size_t j : candidates) {
      for (std::size_t i = begin; i < end; ++i)
        scratch_[i - begin] = {X_(rows_[i], j), y_[rows_[i]]};
      std::sort(scratch_.begin(), scratch_.begin() + n);
      std::uint64_t l0 = 0, l1 = 0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        if (scratch_[i].label == 0)
          ++l0;
        else
          ++l1;
        const double lo = scratch_[i].value;
        const double hi = scratch_[i + 1].value;
        if (!(lo < hi)) continue;
        const std::uint64_t nl = l0 + l1;
        const std::uint64_t nr = n - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const std::uint64_t r0 = c0 - l0;
        const std::uint64_t r1 = c1 - l1;
        const double score =
            (static_cast<double>(l0) * l0 + static_cast<double>(l1) * l1) / nl +
            (static_cast<double>(r0) * r0 + static_cast<double>(r1) * r1) / nr;
        // Candidates arrive in ascending (feature, threshold) order, so a
        // strict comparison keeps the lowest-index tie winner.
        if (!best.found || score > best.score) {
          double threshold = lo + (hi - lo) * 0.5;
          if (!(threshold < hi)) threshold = lo;  // adjacent doubles: keep lo <= t < hi
          best = {true, j, threshold, score, l0, l1};
        }
      }
    }
    if (best.found) {
      const std::uint64_t r0 = c0 - best.l0;
      const std::uint64_t r1 = c1 - best.l1;
      if (!strictly_positive_decrease(best.l0, best.l1, r0, r1)) best.found = false;
    }
    return best;
  }

  std::int32_t grow(std::size_t begin, std::size_t end, int depth) {
    std::uint64_t c0 = 0, c1 = 0;
    for (std::size_t i = begin; i < end; ++i) {
      if (y_[rows_[i]] == 0)
        ++c0;
      else
        ++c1;
    }
    const std::size_t n = end - begin;
    if (c0 == 0 || c1 == 0 || n < static_cast<std::size_t>(cfg_.min_samples_split) ||
        (cfg_.max_depth > 0 && depth >= cfg_.max_depth))
      return make_leaf(c0, c1);
    const BestSplit best = find_best_split(begin, end, c0, c1);
    if (!best.found) return make_leaf(c0, c1);

    const auto mid_it =
        std::partition(rows_.begin() + begin, rows_.begin() + end, [&](std::size_t r) {
          return X_(r, best.feature) <= best.threshold;
        });
    const std::size_t mid = static_cast<std::size_t>(mid_it - rows_.begin());

    TreeNode node;
    node.feature = static_cast<std::int32_t>(best.feature);
    node.threshold = best.threshold;
    node.counts = {c0, c1};
    nodes_.push_back(node);
    const auto index = static_cast<std::int32_t>(nodes_.size() - 1);
    const std::int32_t left = grow(begin, mid, depth + 1);
    const std::int32_t right = grow(mid, end, depth + 1);
    nodes_[index].left = left;
    nodes_[index].right = right;
    return index;
  }

  const Matrix& X_;
  const std::vector<int>& y_;
  const ForestConfig& cfg_;
  Rng& rng_;
  std::size_t n_candidates_;
  std::vector<std::size_t> rows_;
  std::vector<ValueLabel> scratch_;
  std::vector<TreeNode> nodes_;
};

void check_training_input(const Matrix& X, const std::vector<int>& y) {
  if (X.rows() == 0) throw DataError("forest training needs at least one row");
  if (y.size() != X.rows()) throw DataError("labels length does not match matrix rows");
  for (int label : y)
    if (label != 0 && label != 1) throw DataError("forest labels must be 0 or 1");
  for (double v : X.data())
    if (!std::isfinite(v)) throw DataError("forest training matrix has non-finite entries");
}

void check_width(const ForestModel& m, std::size_t width) {
  if (width != m.n_columns())
    throw DataError("row width " + std::to_string(width) + " does not match the model's " +
                    std::to_string(m.n_columns()) + " columns");
}

}  // namespace

std::size_t FeatureSubset::resolve(std::size_t p) const {
  if (p == 0) return 0;
  switch (mode) {
    case Mode::all:
      return p;
    case Mode::fixed:
      return std::min<std::size_t>(std::max(count, 1), p);
    case Mode::sqrt_of_p:
    default:
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(p))));
  }
}

std::string to_string(const FeatureSubset& subset) {
  switch (subset.mode) {
    case FeatureSubset::Mode::all:
      return "all";
    case FeatureSubset::Mode::fixed:
      return std::to_string(subset.count);
    case FeatureSubset::Mode::sqrt_of_p:
    default:
      return "sqrt";
  }
}

FeatureSubset feature_subset_from_string(std::string_view text) {
  if (text == "sqrt") return FeatureSubset::sqrt_of();
  if (text == "all") return FeatureSubset::all_of();
  long long count = 0;
  try {
    count = parse_int(text, "features_per_split");
  } catch (const Error&) {
    throw ConfigError("features_per_split must be 'sqrt', 'all', or a count >= 1, got '" +
                      std::string(text) + "'");
  }
  if (count < 1) throw ConfigError("features_per_split must be 'sqrt', 'all', or a count >= 1");
  return FeatureSubset::fixed_of(static_cast<int>(count));
}

void ForestConfig::validate() const {
  if (n_trees < 1) throw ConfigError("n_trees must be >= 1");
  if (max_depth < 0) throw ConfigError("max_depth must be >= 0 (0 = unlimited)");
  if (min_samples_split < 2) throw ConfigError("min_samples_split must be >= 2");
  if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
  if (features_per_split.mode == FeatureSubset::Mode::fixed && features_per_split.count < 1)
    throw ConfigError("features_per_split count must be >= 1");
  if (n_threads < 0) throw ConfigError("n_threads must be >= 0 (0 = auto)");
}

std::size_t Tree::leaf_for(std::span<const double> x) const {
  std::size_t at = 0;
  while (!nodes[at].is_leaf()) {
    const TreeNode& node = nodes[at];
    at = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold
                                      ? node.left
                                      : node.right);
  }
  return at;
}

int Tree::vote(std::span<const double> x) const {
  const auto& counts = nodes[leaf_for(x)].counts;
  return counts[1] > counts[0] ? 1 : 0;
}

double Tree::proba(std::span<const double> x) const {
  const auto& counts = nodes[leaf_for(x)].counts;
  return static_cast<double>(counts[1]) / static_cast<double>(counts[0] + counts[1]);
}

Tree fit_tree(const Matrix& X, const std::vector<int>& y, const ForestConfig& cfg, Rng& rng) {
  cfg.validate();
  check_training_input(X, y);
  return TreeBuilder(X, y, cfg, rng).build();
}

ForestModel fit_forest(const Matrix& X, const std::vector<int>& y, const ForestConfig& cfg,
                       const std::vector<std::string>& column_names) {
  cfg.validate();
  check_training_input(X, y);
  ForestModel model;
  model.config = cfg;
  if (column_names.empty()) {
    model.column_names.reserve(X.cols());
    for (std::size_t j = 0; j < X.cols(); ++j) model.column_names.push_back("x" + std::to_string(j));
  } else {
    if (column_names.size() != X.cols())
      throw ConfigError("column_names length does not match matrix width");
    model.column_names = column_names;
  }
  const std::size_t n = X.rows();
  model.trees.resize(static_cast<std::size_t>(cfg.n_trees));
  model.bootstrap_indices.resize(static_cast<std::size_t>(cfg.n_trees));
  parallel_for(static_cast<std::size_t>(cfg.n_trees), cfg.n_threads, [&](std::size_t t) {
    Rng rng(derive_seed(cfg.seed, "tree", t));
    std::vector<std::size_t> sample(n);
    for (std::size_t i = 0; i < n; ++i) sample[i] = static_cast<std::size_t>(rng.below(n));
    const Matrix Xb = X.select_rows(sample);
    std::vector<int> yb(n);
    for (std::size_t i = 0; i < n; ++i) yb[i] = y[sample[i]];
    model.trees[t] = TreeBuilder(Xb, yb, cfg, rng).build();
    model.bootstrap_indices[t] = std::move(sample);
  });
  return model;
}

double predict_proba(const ForestModel& m, std::span<const double> x) {
  check_width(m, x.size());
  double sum = 0.0;
  for (const Tree& tree : m.trees) sum += tree.proba(x);
  return sum / static_cast<double>(m.trees.size());
}

int predict(const ForestModel& m, std::span<const double> x) {
  check_width(m, x.size());
  std::size_t votes1 = 0;
  for (const Tree& tree : m.trees) votes1 += static_cast<std::size_t>(tree.vote(x));
  return 2 * votes1 > m.trees.size() ? 1 : 0;
}

std::vector<double> predict_proba_rows(const ForestModel& m, const Matrix& X) {
  std::vector<double> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = predict_proba(m, X.row(i));
  return out;
}

std::vector<int> predict_rows(const ForestModel& m, const Matrix& X) {
  std::vector<int> out(X.rows());
  for (std::size_t i = 0; i < X.rows(); ++i) out[i] = predict(m, X.row(i));
  return out;
}

std::vector<double> feature_importance(const ForestModel& m) {
  std::vector<double> total(m.n_columns(), 0.0);
  for (const Tree& tree : m.trees) {
    if (tree.nodes.empty()) continue;
    const double root_samples =
        static_cast<double>(tree.nodes[0].counts[0] + tree.nodes[0].counts[1]);
    for (const TreeNode& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const auto& lc = tree.nodes[static_cast<std::size_t>(node.left)].counts;
      const auto& rc = tree.nodes[static_cast<std::size_t>(node.right)].counts;
      const double n = static_cast<double>(node.counts[0] + node.counts[1]);
      const double nl = static_cast<double>(lc[0] + lc[1]);
      const double nr = static_cast<double>(rc[0] + rc[1]);
      const double decrease = gini(node.counts[0], node.counts[1]) -
                              (nl / n) * gini(lc[0], lc[1]) - (nr / n) * gini(rc[0], rc[1]);
      total[static_cast<std::size_t>(node.feature)] += (n / root_samples) * decrease;
    }
  }
  for (double& v : total) v /= static_cast<double>(m.trees.size());
  double sum = 0.0;
  for (double v : total) sum += v;
  if (sum > 0.0)
    for (double& v : total) v /= sum;
  return total;
}

void write_forest(std::ostream& out, const ForestModel& m) {
  out << "n_trees " << m.config.n_trees << '\n';
  out << "max_depth " << m.config.max_depth << '\n';
  out << "min_samples_split " << m.config.min_samples_split << '\n';
  out << "min_samples_leaf " << m.config.min_samples_leaf << '\n';
  out << "features_per_split " << to_string(m.config.features_per_split) << '\n';
  out << "seed " << m.config.seed << '\n';
  out << "n_threads " << m.config.n_threads << '\n';
  out << "columns " << m.column_names.size() << '\n';
  for (const auto& name : m.column_names) out << "column " << name << '\n';
  out << "trees " << m.trees.size() << '\n';
  for (std::size_t t = 0; t < m.trees.size(); ++t) {
    const Tree& tree = m.trees[t];
    out << "tree " << tree.nodes.size() << '\n';
    for (const TreeNode& node : tree.nodes) {
      out << node.feature << ' ' << format_double(node.threshold) << ' ' << node.left << ' '
          << node.right << ' ' << node.counts[0] << ' ' << node.counts[1] << '\n';
    }
    const auto& sample = t < m.bootstrap_indices.size() ? m.bootstrap_indices[t]
                                                        : std::vector<std::size_t>{};
    out << "bootstrap " << sample.size() << '\n';
    for (std::size_t i = 0; i < sample.size(); ++i) {
      if (i) out << ' ';
      out << sample[i];
    }
    out << '\n';
  }
}

namespace {

std::string read_value_line(std::istream& in, const std::string& key) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("forest model: unexpected end of input");
  if (line.rfind(key, 0) != 0 || (line.size() > key.size() && line[key.size()] != ' '))
    throw DataError("forest model: expected '" + key + "', got '" + line + "'");
  return line.size() > key.size() ? line.substr(key.size() + 1) : "";
}

}  // namespace

ForestModel read_forest(std::istream& in) {
  ForestModel m;
  m.config.n_trees = static_cast<int>(parse_int(read_value_line(in, "n_trees"), "forest model"));
  m.config.max_depth =
      static_cast<int>(parse_int(read_value_line(in, "max_depth"), "forest model"));
  m.config.min_samples_split =
      static_cast<int>(parse_int(read_value_line(in, "min_samples_split"), "forest model"));
  m.config.min_samples_leaf =
      static_cast<int>(parse_int(read_value_line(in, "min_samples_leaf"), "forest model"));
  try {
    m.config.features_per_split =
        feature_subset_from_string(read_value_line(in, "features_per_split"));
  } catch (const ConfigError& e) {
    throw DataError("forest model: " + std::string(e.what()));
  }
  m.config.seed = parse_uint64(read_value_line(in, "seed"), "forest model");
  m.config.n_threads =
      static_cast<int>(parse_int(read_value_line(in, "n_threads"), "forest model"));
  const auto n_columns =
      static_cast<std::size_t>(parse_int(read_value_line(in, "columns"), "forest model"));
  for (std::size_t j = 0; j < n_columns; ++j)
    m.column_names.push_back(read_value_line(in, "column"));
  const auto n_trees =
      static_cast<std::size_t>(parse_int(read_value_line(in, "trees"), "forest model"));
  m.trees.resize(n_trees);
  m.bootstrap_indices.resize(n_trees);
  for (std::size_t t = 0; t < n_trees; ++t) {
    const auto n_nodes =
        static_cast<std::size_t>(parse_int(read_value_line(in, "tree"), "forest model"));
    m.trees[t].nodes.resize(n_nodes);
    for (std::size_t k = 0; k < n_nodes; ++k) {
      std::string line;
      if (!std::getline(in, line)) throw DataError("forest model: truncated node list");
      std::istringstream parts(line);
      std::string feature, threshold, left, right, c0, c1;
      if (!(parts >> feature >> threshold >> left >> right >> c0 >> c1))
        throw DataError("forest model: malformed node line '" + line + "'");
      TreeNode& node = m.trees[t].nodes[k];
      node.feature = static_cast<std::int32_t>(parse_int(feature, "forest node"));
      node.threshold = parse_double(threshold, "forest node");
      node.left = static_cast<std::int32_t>(parse_int(left, "forest node"));
      node.right = static_cast<std::int32_t>(parse_int(right, "forest node"));
      node.counts[0] = static_cast<std::uint64_t>(parse_int(c0, "forest node"));
      node.counts[1] = static_cast<std::uint64_t>(parse_int(c1, "forest node"));
    }
    const auto n_sample =
        static_cast<std::size_t>(parse_int(read_value_line(in, "bootstrap"), "forest model"));
    std::string line;
    if (!std::getline(in, line)) throw DataError("forest model: truncated bootstrap list");
    std::istringstream parts(line);
    std::string token;
    auto& sample = m.bootstrap_indices[t];
    sample.reserve(n_sample);
    while (parts >> token)
      sample.push_back(static_cast<std::size_t>(parse_int(token, "forest bootstrap")));
    if (sample.size() != n_sample)
      throw DataError("forest model: bootstrap list length mismatch");
  }
  return m;
}

}  // namespace tabrisk::forest
