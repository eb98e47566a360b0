#include "tabrisk/explain.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <ostream>

#include "json.hpp"

#include "tabrisk/rng.hpp"

namespace tabrisk::explain {
namespace {

double mean_proba(const forest::ForestModel& model, const Matrix& rows) {
  double sum = 0.0;
  for (std::size_t i = 0; i < rows.rows(); ++i)
    sum += forest::predict_proba(model, rows.row(i));
  return sum / static_cast<double>(rows.rows());
}

}  // namespace

void ValueFunction::validate() const {
  if (model == nullptr) throw ConfigError("value function has no model");
  if (background.rows() == 0) throw ConfigError("value function needs background rows");
  if (background.cols() != model->n_columns())
    throw DataError("background width does not match the model");
  if (instance.size() != model->n_columns())
    throw DataError("instance width does not match the model");
}

double value_function(const ValueFunction& v, const std::vector<std::size_t>& subset) {
  v.validate();
  const std::size_t p = v.instance.size();
  for (std::size_t j : subset)
    if (j >= p) throw DataError("value_function: feature index out of range");
  if (subset.size() == p) {
    std::vector<bool> seen(p, false);
    bool full = true;
    for (std::size_t j : subset) seen[j] = true;
    for (std::size_t j = 0; j < p && full; ++j) full = seen[j];
    if (full) return forest::predict_proba(*v.model, v.instance);
  }
  Matrix composite = v.background;
  for (std::size_t i = 0; i < composite.rows(); ++i) {
    auto row = composite.row(i);
    for (std::size_t j : subset) row[j] = v.instance[j];
  }
  return mean_proba(*v.model, composite);
}

ShapExplanation shap_exact(const ValueFunction& v, int exact_limit) {
  v.validate();
  const std::size_t p = v.instance.size();
  if (p > static_cast<std::size_t>(exact_limit) || p >= 63)
    throw ConfigError("exact Shapley enumeration is limited to " +
                      std::to_string(exact_limit) +
                      " features; use the sampled estimator instead");

  const std::uint64_t n_masks = std::uint64_t{1} << p;
  const std::uint64_t full = n_masks - 1;
  std::vector<double> value(n_masks);
  Matrix composite(v.background.rows(), v.background.cols());
  for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
    if (mask == full) {
      value[mask] = forest::predict_proba(*v.model, v.instance);
      continue;
    }
    composite = v.background;
    for (std::size_t i = 0; i < composite.rows(); ++i) {
      auto row = composite.row(i);
      for (std::size_t j = 0; j < p; ++j)
        if (mask & (std::uint64_t{1} << j)) row[j] = v.instance[j];
    }
    value[mask] = mean_proba(*v.model, composite);
  }

  std::vector<double> factorial(p + 1, 1.0);  // exact in double through 15!
  for (std::size_t i = 1; i <= p; ++i) factorial[i] = factorial[i - 1] * static_cast<double>(i);

  ShapExplanation out;
  out.method = ShapExplanation::Method::exact;
  out.phi.assign(p, 0.0);
  out.baseline = value[0];
  out.prediction = value[full];
  for (std::size_t j = 0; j < p; ++j) {
    const std::uint64_t bit = std::uint64_t{1} << j;
    double phi = 0.0;
    for (std::uint64_t mask = 0; mask < n_masks; ++mask) {
      if (mask & bit) continue;
      const auto s = static_cast<std::size_t>(std::popcount(mask));
      const double weight = factorial[s] * factorial[p - s - 1] / factorial[p];
      phi += weight * (value[mask | bit] - value[mask]);
    }
    out.phi[j] = phi;
  }
  return out;
}

ShapExplanation shap_sampled(const ValueFunction& v, int n_permutations, std::uint64_t seed) {
  v.validate();
  if (n_permutations < 1) throw ConfigError("shap_sampled needs n_permutations >= 1");
  const std::size_t p = v.instance.size();

  ShapExplanation out;
  out.method = ShapExplanation::Method::sampled;
  out.samples = n_permutations;
  out.baseline = mean_proba(*v.model, v.background);
  out.prediction = forest::predict_proba(*v.model, v.instance);
  out.phi.assign(p, 0.0);

  Rng rng(seed);
  std::vector<std::size_t> order(p);
  Matrix composite(v.background.rows(), v.background.cols());
  for (int t = 0; t < n_permutations; ++t) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng.shuffle(order);
    composite = v.background;
    double previous = out.baseline;
    for (std::size_t step = 0; step < p; ++step) {
      const std::size_t j = order[step];
      for (std::size_t i = 0; i < composite.rows(); ++i) composite(i, j) = v.instance[j];
      // Final step: the composite rows all equal the instance, so take the
      // model score directly and the walk telescopes exactly to it.
      const double current =
          step + 1 == p ? out.prediction : mean_proba(*v.model, composite);
      out.phi[j] += current - previous;
      previous = current;
    }
  }
  for (double& phi : out.phi) phi /= static_cast<double>(n_permutations);
  return out;
}

GlobalShapSummary global_summary(const std::vector<ShapExplanation>& explanations) {
  if (explanations.empty()) throw DataError("global_summary: no explanations");
  const std::size_t p = explanations.front().phi.size();
  for (const auto& e : explanations)
    if (e.phi.size() != p) throw DataError("global_summary: mixed feature counts");
  GlobalShapSummary summary;
  summary.mean_abs_phi.assign(p, 0.0);
  summary.mean_phi.assign(p, 0.0);
  summary.per_instance = Matrix(explanations.size(), p);
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      const double phi = explanations[i].phi[j];
      summary.per_instance(i, j) = phi;
      summary.mean_abs_phi[j] += std::abs(phi);
      summary.mean_phi[j] += phi;
    }
  }
  const auto n = static_cast<double>(explanations.size());
  for (std::size_t j = 0; j < p; ++j) {
    summary.mean_abs_phi[j] /= n;
    summary.mean_phi[j] /= n;
  }
  return summary;
}

void write_shap_csv(std::ostream& out, const std::vector<std::int64_t>& instance_ids,
                    const std::vector<ShapExplanation>& explanations,
                    const std::vector<std::string>& column_names) {
  if (instance_ids.size() != explanations.size())
    throw DataError("shap csv: ids and explanations differ in length");
  out << "instance_id";
  for (const auto& name : column_names) out << ',' << name;
  out << ",baseline,prediction\n";
  for (std::size_t i = 0; i < explanations.size(); ++i) {
    out << instance_ids[i];
    for (double phi : explanations[i].phi) out << ',' << format_double(phi);
    out << ',' << format_double(explanations[i].baseline) << ','
        << format_double(explanations[i].prediction) << '\n';
  }
}

std::string global_summary_to_json(const GlobalShapSummary& summary,
                                   const std::vector<std::string>& column_names) {
  if (column_names.size() != summary.mean_phi.size())
    throw DataError("shap summary: column name count mismatch");
  nlohmann::json j;
  j["features"] = column_names;
  j["mean_abs_phi"] = summary.mean_abs_phi;
  j["mean_phi"] = summary.mean_phi;
  return j.dump(2) + "\n";
}

}  // namespace tabrisk::explain
