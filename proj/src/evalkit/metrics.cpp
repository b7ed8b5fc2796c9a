/*
 * Copyright 2026 The NeuroLOS Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "neurolos/metrics.hpp"

#include <cstdio>
#include <sstream>

#include "neurolos/common.hpp"
#include "neurolos/csv.hpp"

namespace neurolos::eval {

std::size_t ConfusionMatrix::tp(int c) const { return counts[c][c]; }

std::size_t ConfusionMatrix::fp(int c) const {
  std::size_t s = 0;
  for (int t = 0; t < kNumClasses; ++t) {
    if (t != c) s += counts[t][c];
  }
  return s;
}

std::size_t ConfusionMatrix::fn(int c) const {
  std::size_t s = 0;
  for (int p = 0; p < kNumClasses; ++p) {
    if (p != c) s += counts[c][p];
  }
  return s;
}

std::size_t ConfusionMatrix::support(int c) const { return tp(c) + fn(c); }

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (const auto& row : counts) {
    for (auto v : row) s += v;
  }
  return s;
}

namespace {

double ratio(std::size_t num, std::size_t den, bool& zero_division) {
  if (den == 0) {
    zero_division = true;
    return 0.0;
  }
  return static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

MetricsReport compute_metrics(std::span<const int> y_true, std::span<const int> y_pred) {
  require(y_true.size() == y_pred.size(), ErrorKind::kValidation,
          "y_true and y_pred differ in length (" + std::to_string(y_true.size()) + " vs " +
              std::to_string(y_pred.size()) + ")");
  require(!y_true.empty(), ErrorKind::kValidation, "metrics need at least one prediction");
  MetricsReport r;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    int t = y_true[i], p = y_pred[i];
    require(t >= 0 && t < kNumClasses && p >= 0 && p < kNumClasses, ErrorKind::kValidation,
            "labels must lie in {0,1,2}");
    ++r.confusion.counts[t][p];
  }
  const auto& cm = r.confusion;
  const double n = static_cast<double>(cm.total());
  std::size_t tp_sum = 0, fp_sum = 0, fn_sum = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    bool zp = false, zr = false;
    r.precision[c] = ratio(cm.tp(c), cm.tp(c) + cm.fp(c), zp);
    r.recall[c] = ratio(cm.tp(c), cm.tp(c) + cm.fn(c), zr);
    r.f1[c] = harmonic(r.precision[c], r.recall[c]);
    if (zp) r.notes.push_back("precision of class " + std::to_string(c) + " is 0/0, reported as 0");
    if (zr) r.notes.push_back("recall of class " + std::to_string(c) + " is 0/0, reported as 0");
    r.zero_division = r.zero_division || zp || zr;
    tp_sum += cm.tp(c);
    fp_sum += cm.fp(c);
    fn_sum += cm.fn(c);
    double w = static_cast<double>(cm.support(c)) / n;
    r.macro.precision += r.precision[c] / kNumClasses;
    r.macro.recall += r.recall[c] / kNumClasses;
    r.macro.f1 += r.f1[c] / kNumClasses;
    r.weighted.precision += w * r.precision[c];
    r.weighted.recall += w * r.recall[c];
    r.weighted.f1 += w * r.f1[c];
  }
  r.accuracy = static_cast<double>(tp_sum) / n;
  bool unused = false;
  r.micro.precision = ratio(tp_sum, tp_sum + fp_sum, unused);
  r.micro.recall = ratio(tp_sum, tp_sum + fn_sum, unused);
  r.micro.f1 = harmonic(r.micro.precision, r.micro.recall);
  return r;
}

bool is_known_metric(const std::string& metric) {
  for (const char* m : {"accuracy", "macro_f1", "weighted_f1", "micro_f1", "macro_precision",
                        "macro_recall"}) {
    if (metric == m) return true;
  }
  return false;
}

double metric_value(const MetricsReport& report, const std::string& metric) {
  if (metric == "accuracy") return report.accuracy;
  if (metric == "macro_f1") return report.macro.f1;
  if (metric == "weighted_f1") return report.weighted.f1;
  if (metric == "micro_f1") return report.micro.f1;
  if (metric == "macro_precision") return report.macro.precision;
  if (metric == "macro_recall") return report.macro.recall;
  fail(ErrorKind::kValidation, "unknown metric '" + metric + "'");
}

std::string markdown_table(const std::vector<NamedReport>& rows, const std::string& averaging) {
  require(averaging == "macro" || averaging == "weighted" || averaging == "micro",
          ErrorKind::kValidation, "unknown averaging '" + averaging + "'");
  std::ostringstream ss;
  ss << "| Model | Accuracy | Precision | Recall | F1 Score |\n";
  ss << "|---|---|---|---|---|\n";
  for (const auto& row : rows) {
    const auto& r = row.report;
    const Averages& a = averaging == "macro" ? r.macro : averaging == "weighted" ? r.weighted : r.micro;
    ss << "| " << row.model << " | " << fmt(r.accuracy) << " | " << fmt(a.precision) << " | "
       << fmt(a.recall) << " | " << fmt(a.f1) << " |\n";
  }
  return ss.str();
}

std::string metrics_csv(const std::vector<NamedReport>& rows) {
  std::ostringstream ss;
  csv::write_row(ss, {"model", "accuracy", "macro_precision", "macro_recall", "macro_f1",
                      "weighted_precision", "weighted_recall", "weighted_f1", "micro_precision",
                      "micro_recall", "micro_f1", "zero_division"});
  for (const auto& row : rows) {
    const auto& r = row.report;
    csv::write_row(ss, {row.model, fmt(r.accuracy), fmt(r.macro.precision), fmt(r.macro.recall),
                        fmt(r.macro.f1), fmt(r.weighted.precision), fmt(r.weighted.recall),
                        fmt(r.weighted.f1), fmt(r.micro.precision), fmt(r.micro.recall),
                        fmt(r.micro.f1), r.zero_division ? "1" : "0"});
  }
  return ss.str();
}

std::string per_class_csv(const std::vector<NamedReport>& rows) {
  std::ostringstream ss;
  csv::write_row(ss, {"model", "class", "precision", "recall", "f1", "support"});
  for (const auto& row : rows) {
    for (int c = 0; c < kNumClasses; ++c) {
      csv::write_row(ss, {row.model, std::string(to_string(static_cast<LosClass>(c))),
                          fmt(row.report.precision[c]), fmt(row.report.recall[c]),
                          fmt(row.report.f1[c]), std::to_string(row.report.confusion.support(c))});
    }
  }
  return ss.str();
}

std::string confusion_csv(const std::vector<NamedReport>& rows) {
  std::ostringstream ss;
  csv::write_row(ss, {"model", "true_class", "pred_short", "pred_medium", "pred_long"});
  for (const auto& row : rows) {
    for (int t = 0; t < kNumClasses; ++t) {
      const auto& c = row.report.confusion.counts[t];
      csv::write_row(ss, {row.model, std::string(to_string(static_cast<LosClass>(t))),
                          std::to_string(c[0]), std::to_string(c[1]), std::to_string(c[2])});
    }
  }
  return ss.str();
}

}  // namespace neurolos::eval
