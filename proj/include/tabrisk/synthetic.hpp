#pragma once

#include <cstdint>

#include "tabrisk/tabular.hpp"

namespace tabrisk::synth {

struct SyntheticSpec {
  std::size_t n_rows = 5000;
  double positive_rate = 0.2;
  int n_continuous = 8;
  int n_categorical = 2;
  double interaction_strength = 1.0;
  double noise_level = 1.0;
  double missing_rate = 0.05;
  std::uint64_t seed = 42;

  void validate() const;  // throws ConfigError on out-of-range fields
};

struct SyntheticData {
  tabular::Dataset dataset;
  tabular::SchemaFile schema;
};

// Vital-sign-shaped tabular data with a known logistic ground truth: the
// first four standardized continuous features carry weights 4.0/3.2/2.4/1.6,
// the first two interact at interaction_strength, the first categorical
// shifts the score per level, and a Gaussian noise term is added at
// noise_level. The label rate is calibrated to positive_rate by solving for
// the logistic bias, labels are Bernoulli draws, and missing cells are masked
// uniformly at missing_rate. Identical specs reproduce identical bytes.
SyntheticData generate_synthetic(const SyntheticSpec& spec);

}  // namespace tabrisk::synth
