#include "tabrisk/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "tabrisk/common.hpp"
#include "tabrisk/rng.hpp"

namespace tabrisk::synth {

namespace {

struct ContinuousTemplate {
  const char* name;
  double mean;
  double sd;
  bool critical;
};

struct CategoricalTemplate {
  const char* name;
  std::vector<std::string> levels;
};

const ContinuousTemplate kContinuousTemplates[] = {
    {"heart_rate", 88.0, 18.0, true},
    {"resp_rate", 19.0, 5.0, true},
    {"systolic_bp", 122.0, 22.0, true},
    {"spo2", 96.0, 3.0, false},
    {"temperature", 37.0, 0.8, false},
    {"lactate", 2.1, 1.4, false},
    {"wbc_count", 10.5, 4.5, false},
    {"creatinine", 1.3, 0.9, false},
    {"glucose", 142.0, 48.0, false},
    {"age", 64.0, 16.0, false},
};

const CategoricalTemplate kCategoricalTemplates[] = {
    {"sex", {"female", "male"}},
    {"admission_type", {"elective", "emergency", "urgent"}},
    {"service_unit", {"cardiac", "medical", "surgical", "trauma"}},
};

constexpr std::size_t kContinuousTemplateCount =
    sizeof(kContinuousTemplates) / sizeof(kContinuousTemplates[0]);
constexpr std::size_t kCategoricalTemplateCount =
    sizeof(kCategoricalTemplates) / sizeof(kCategoricalTemplates[0]);

// Weights of the standardized continuous drivers, strongest first. The scale
// is deliberately large relative to the logistic's unit temperature so labels
// are close to deterministic away from the class boundary.
constexpr double kDriverWeights[] = {4.0, 3.2, 2.4, 1.6};
constexpr std::size_t kDriverCount = 4;

// Score shift between adjacent levels of the first categorical feature.
constexpr double kCategoricalEffect = 2.0;

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Solves for the bias b with mean_i sigmoid(score_i + b) == target. The mean
// is strictly increasing in b and saturates at {0, 1}, so bisection on a wide
// bracket always converges.
double calibrate_bias(const std::vector<double>& scores, double target) {
  double lo = -60.0;
  double hi = 60.0;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    double total = 0.0;
    for (double s : scores) total += sigmoid(s + mid);
    if (total / static_cast<double>(scores.size()) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace

void SyntheticSpec::validate() const {
  if (n_rows < 10) {
    throw ConfigError("synthetic n_rows must be at least 10, got " +
                      std::to_string(n_rows));
  }
  if (!(positive_rate > 0.0) || !(positive_rate < 1.0)) {
    throw ConfigError("synthetic positive_rate must lie strictly between 0 and 1");
  }
  if (n_continuous < 1) {
    throw ConfigError("synthetic n_continuous must be at least 1");
  }
  if (n_categorical < 0) {
    throw ConfigError("synthetic n_categorical must not be negative");
  }
  if (!std::isfinite(interaction_strength) || interaction_strength < 0.0) {
    throw ConfigError("synthetic interaction_strength must be finite and non-negative");
  }
  if (!std::isfinite(noise_level) || noise_level < 0.0) {
    throw ConfigError("synthetic noise_level must be finite and non-negative");
  }
  if (!(missing_rate >= 0.0) || !(missing_rate <= 1.0)) {
    throw ConfigError("synthetic missing_rate must lie in [0, 1]");
  }
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  const std::size_t n = spec.n_rows;
  const std::size_t n_cont = static_cast<std::size_t>(spec.n_continuous);
  const std::size_t n_cat = static_cast<std::size_t>(spec.n_categorical);

  // Schema: named vital-sign features first, generic fillers beyond the
  // template lists. The first (up to) three continuous features are critical
  // so the exclusion rule is exercised by default.
  std::vector<tabular::FeatureSchema> features;
  std::vector<std::vector<std::string>> cat_levels;
  for (std::size_t j = 0; j < n_cont; ++j) {
    tabular::FeatureSchema f;
    if (j < kContinuousTemplateCount) {
      f.name = kContinuousTemplates[j].name;
      f.critical = kContinuousTemplates[j].critical;
    } else {
      f.name = "lab_" + std::to_string(j - kContinuousTemplateCount);
      f.critical = false;
    }
    f.kind = tabular::FeatureKind::continuous;
    features.push_back(std::move(f));
  }
  for (std::size_t j = 0; j < n_cat; ++j) {
    tabular::FeatureSchema f;
    if (j < kCategoricalTemplateCount) {
      f.name = kCategoricalTemplates[j].name;
      cat_levels.push_back(kCategoricalTemplates[j].levels);
    } else {
      f.name = "flag_" + std::to_string(j - kCategoricalTemplateCount);
      cat_levels.push_back({"absent", "present"});
    }
    f.kind = tabular::FeatureKind::categorical;
    f.critical = false;
    features.push_back(std::move(f));
  }

  // Pass 1: draw the underlying standardized values and the ground-truth
  // score, row-major so the stream is independent of any later masking.
  Rng feature_rng(derive_seed(spec.seed, "synth_features"));
  std::vector<std::vector<double>> z(n_cont, std::vector<double>(n));
  std::vector<std::vector<std::size_t>> level_index(n_cat,
                                                    std::vector<std::size_t>(n));
  std::vector<double> scores(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n_cont; ++j) {
      z[j][i] = feature_rng.normal();
    }
    for (std::size_t j = 0; j < n_cat; ++j) {
      level_index[j][i] = feature_rng.below(cat_levels[j].size());
    }
    const double eps = feature_rng.normal();

    double score = 0.0;
    const std::size_t drivers = std::min(n_cont, kDriverCount);
    for (std::size_t j = 0; j < drivers; ++j) {
      score += kDriverWeights[j] * z[j][i];
    }
    if (n_cont >= 2) {
      score += spec.interaction_strength * z[0][i] * z[1][i];
    }
    if (n_cat >= 1) {
      const double center =
          0.5 * static_cast<double>(cat_levels[0].size() - 1);
      score += kCategoricalEffect *
               (static_cast<double>(level_index[0][i]) - center);
    }
    score += spec.noise_level * eps;
    scores[i] = score;
  }

  const double bias = calibrate_bias(scores, spec.positive_rate);

  // Pass 2: Bernoulli labels from a dedicated stream, so changing the label
  // draw never perturbs the feature values.
  Rng label_rng(derive_seed(spec.seed, "synth_labels"));
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = label_rng.uniform() < sigmoid(scores[i] + bias) ? 1 : 0;
  }

  // Pass 3: missingness mask from its own stream, row-major over features.
  Rng missing_rng(derive_seed(spec.seed, "synth_missing"));
  const std::size_t n_features = n_cont + n_cat;
  std::vector<std::vector<std::uint8_t>> missing(
      n_features, std::vector<std::uint8_t>(n, 0));
  if (spec.missing_rate > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n_features; ++j) {
        if (missing_rng.uniform() < spec.missing_rate) missing[j][i] = 1;
      }
    }
  }

  std::vector<tabular::Column> columns(n_features);
  for (std::size_t j = 0; j < n_cont; ++j) {
    tabular::Column& col = columns[j];
    col.numeric.resize(n, 0.0);
    col.missing = missing[j];
    const double mean = j < kContinuousTemplateCount
                            ? kContinuousTemplates[j].mean
                            : 0.0;
    const double sd =
        j < kContinuousTemplateCount ? kContinuousTemplates[j].sd : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (col.missing[i] == 0) col.numeric[i] = mean + sd * z[j][i];
    }
  }
  for (std::size_t j = 0; j < n_cat; ++j) {
    tabular::Column& col = columns[n_cont + j];
    col.categories.resize(n);
    col.missing = missing[n_cont + j];
    for (std::size_t i = 0; i < n; ++i) {
      if (col.missing[i] == 0) col.categories[i] = cat_levels[j][level_index[j][i]];
    }
  }

  std::vector<std::int64_t> row_ids(n);
  for (std::size_t i = 0; i < n; ++i) row_ids[i] = static_cast<std::int64_t>(i);

  tabular::SchemaFile schema;
  schema.features = features;
  schema.label_column = "label";

  return SyntheticData{
      tabular::Dataset(std::move(features), std::move(columns),
                       std::move(labels), std::move(row_ids)),
      std::move(schema)};
}

}  // namespace tabrisk::synth
