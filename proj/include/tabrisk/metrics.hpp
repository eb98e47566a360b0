#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "tabrisk/common.hpp"

namespace tabrisk::metrics {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

// Zero-denominator cases yield 0 with the matching degenerate flag set, so
// cross-validation over tiny folds never aborts.
struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_degenerate = false;
  bool recall_degenerate = false;
  bool f1_degenerate = false;
};

// One point per distinct score from (0,0) to (1,1); thresholds[0] is +inf
// (serialized as null) for the empty-acceptance corner.
struct RocCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
  std::vector<double> thresholds;
  double auc = 0.0;
};

struct EvalReport {
  ConfusionMatrix confusion;
  ClassificationMetrics metrics;
  RocCurve roc;
  std::string model_id;
  std::string dataset_id;
  std::uint64_t seed = 0;
};

// Positive class is 1.
ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred);

ClassificationMetrics classification_metrics(const ConfusionMatrix& c);

// Scores sorted descending with ties grouped; trapezoidal area equals the
// pairwise ranking statistic P(score_pos > score_neg) + P(equal)/2.
RocCurve roc_auc(const std::vector<int>& y_true, const std::vector<double>& scores);

// JSON round-trip is byte-stable: serializing a parsed report reproduces the
// original text, doubles included.
std::string eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const std::string& text);

// Two-column fpr,tpr CSV for external plotting.
void write_roc_csv(std::ostream& out, const RocCurve& roc);

}  // namespace tabrisk::metrics
