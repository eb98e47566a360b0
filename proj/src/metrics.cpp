#include "tabrisk/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "json.hpp"

namespace tabrisk::metrics {

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred) {
  if (y_true.size() != y_pred.size())
    throw DataError("confusion: label vectors differ in length");
  if (y_true.empty()) throw DataError("confusion: empty inputs");
  ConfusionMatrix c;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] != 0 && y_true[i] != 1)
      throw DataError("confusion: labels must be 0 or 1");
    if (y_pred[i] != 0 && y_pred[i] != 1)
      throw DataError("confusion: predictions must be 0 or 1");
    if (y_true[i] == 1)
      ++(y_pred[i] == 1 ? c.tp : c.fn);
    else
      ++(y_pred[i] == 1 ? c.fp : c.tn);
  }
  return c;
}

ClassificationMetrics classification_metrics(const ConfusionMatrix& c) {
  if (c.total() == 0) throw DataError("classification_metrics: empty confusion matrix");
  ClassificationMetrics m;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fp == 0)
    m.precision_degenerate = true;
  else
    m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn == 0)
    m.recall_degenerate = true;
  else
    m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (m.precision + m.recall == 0.0)
    m.f1_degenerate = true;
  else
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

RocCurve roc_auc(const std::vector<int>& y_true, const std::vector<double>& scores) {
  if (y_true.size() != scores.size())
    throw DataError("roc_auc: labels and scores differ in length");
  std::uint64_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] != 0 && y_true[i] != 1) throw DataError("roc_auc: labels must be 0 or 1");
    if (!std::isfinite(scores[i])) throw DataError("roc_auc: scores must be finite");
    ++(y_true[i] == 1 ? n_pos : n_neg);
  }
  if (n_pos == 0 || n_neg == 0)
    throw DataError("roc_auc: both classes must be present");

  std::vector<std::size_t> order(y_true.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.fpr.push_back(0.0);
  curve.tpr.push_back(0.0);
  curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  std::uint64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double cut = scores[order[i]];
    while (i < order.size() && scores[order[i]] == cut) {
      ++(y_true[order[i]] == 1 ? tp : fp);
      ++i;
    }
    curve.fpr.push_back(static_cast<double>(fp) / static_cast<double>(n_neg));
    curve.tpr.push_back(static_cast<double>(tp) / static_cast<double>(n_pos));
    curve.thresholds.push_back(cut);
  }
  double auc = 0.0;
  for (std::size_t k = 1; k < curve.fpr.size(); ++k)
    auc += (curve.fpr[k] - curve.fpr[k - 1]) * (curve.tpr[k] + curve.tpr[k - 1]) * 0.5;
  curve.auc = auc;
  return curve;
}

std::string eval_report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["confusion"] = {{"tp", report.confusion.tp},
                    {"tn", report.confusion.tn},
                    {"fp", report.confusion.fp},
                    {"fn", report.confusion.fn}};
  j["metrics"] = {{"accuracy", report.metrics.accuracy},
                  {"precision", report.metrics.precision},
                  {"recall", report.metrics.recall},
                  {"f1", report.metrics.f1},
                  {"precision_degenerate", report.metrics.precision_degenerate},
                  {"recall_degenerate", report.metrics.recall_degenerate},
                  {"f1_degenerate", report.metrics.f1_degenerate}};
  nlohmann::json thresholds = nlohmann::json::array();
  for (double t : report.roc.thresholds) {
    if (std::isinf(t))
      thresholds.push_back(nullptr);
    else
      thresholds.push_back(t);
  }
  j["roc"] = {{"auc", report.roc.auc},
              {"fpr", report.roc.fpr},
              {"tpr", report.roc.tpr},
              {"thresholds", thresholds}};
  j["model_id"] = report.model_id;
  j["dataset_id"] = report.dataset_id;
  j["seed"] = report.seed;
  return j.dump(2) + "\n";
}

EvalReport eval_report_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("eval report: invalid JSON: ") + e.what());
  }
  try {
    EvalReport r;
    r.confusion.tp = j.at("confusion").at("tp").get<std::uint64_t>();
    r.confusion.tn = j.at("confusion").at("tn").get<std::uint64_t>();
    r.confusion.fp = j.at("confusion").at("fp").get<std::uint64_t>();
    r.confusion.fn = j.at("confusion").at("fn").get<std::uint64_t>();
    r.metrics.accuracy = j.at("metrics").at("accuracy").get<double>();
    r.metrics.precision = j.at("metrics").at("precision").get<double>();
    r.metrics.recall = j.at("metrics").at("recall").get<double>();
    r.metrics.f1 = j.at("metrics").at("f1").get<double>();
    r.metrics.precision_degenerate = j.at("metrics").at("precision_degenerate").get<bool>();
    r.metrics.recall_degenerate = j.at("metrics").at("recall_degenerate").get<bool>();
    r.metrics.f1_degenerate = j.at("metrics").at("f1_degenerate").get<bool>();
    r.roc.auc = j.at("roc").at("auc").get<double>();
    r.roc.fpr = j.at("roc").at("fpr").get<std::vector<double>>();
    r.roc.tpr = j.at("roc").at("tpr").get<std::vector<double>>();
    for (const auto& t : j.at("roc").at("thresholds")) {
      if (t.is_null())
        r.roc.thresholds.push_back(std::numeric_limits<double>::infinity());
      else
        r.roc.thresholds.push_back(t.get<double>());
    }
    r.model_id = j.at("model_id").get<std::string>();
    r.dataset_id = j.at("dataset_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("eval report: missing or mistyped field: ") + e.what());
  }
}

void write_roc_csv(std::ostream& out, const RocCurve& roc) {
  out << "fpr,tpr\n";
  for (std::size_t i = 0; i < roc.fpr.size(); ++i)
    out << format_double(roc.fpr[i]) << ',' << format_double(roc.tpr[i]) << '\n';
}

}  // namespace tabrisk::metrics
