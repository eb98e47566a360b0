#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tabrisk/common.hpp"
#include "tabrisk/forest.hpp"

namespace tabrisk::explain {

// Interventional value function: f(S) is the mean model score over background
// rows with the coalition S's features replaced by the instance's values.
struct ValueFunction {
  const forest::ForestModel* model = nullptr;
  Matrix background;
  std::vector<double> instance;

  void validate() const;  // throws on empty background or width mismatches
};

// f(S) for an explicit feature subset. The full coalition returns
// predict_proba(model, instance) directly, with no background averaging.
double value_function(const ValueFunction& v, const std::vector<std::size_t>& subset);

struct ShapExplanation {
  std::vector<double> phi;   // per-feature attribution
  double baseline = 0.0;     // f(empty set)
  double prediction = 0.0;   // predict_proba at the instance
  enum class Method { exact, sampled };
  Method method = Method::exact;
  int samples = 0;  // 0 for exact
};

// Full subset enumeration with one memoized evaluation per coalition;
// baseline + sum(phi) telescopes to the prediction. Feature counts above
// exact_limit are refused (2^p coalition evaluations) in favor of sampling.
ShapExplanation shap_exact(const ValueFunction& v, int exact_limit = 15);

// Uniform permutation sampling: each permutation walks its feature order,
// crediting every feature with the score change its arrival causes, so the
// attributions telescope from baseline to prediction for every permutation.
ShapExplanation shap_sampled(const ValueFunction& v, int n_permutations, std::uint64_t seed);

struct GlobalShapSummary {
  std::vector<double> mean_abs_phi;  // importance ranking
  std::vector<double> mean_phi;      // signed direction
  Matrix per_instance;               // one row of phi per explanation
};

GlobalShapSummary global_summary(const std::vector<ShapExplanation>& explanations);

// One row per instance: id then per-feature phi columns.
void write_shap_csv(std::ostream& out, const std::vector<std::int64_t>& instance_ids,
                    const std::vector<ShapExplanation>& explanations,
                    const std::vector<std::string>& column_names);

std::string global_summary_to_json(const GlobalShapSummary& summary,
                                   const std::vector<std::string>& column_names);

}  // namespace tabrisk::explain
