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

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "neurolos/los.hpp"

namespace neurolos::eval {

// counts[true][predicted]
struct ConfusionMatrix {
  std::array<std::array<std::size_t, kNumClasses>, kNumClasses> counts{};

  std::size_t tp(int c) const;
  std::size_t fp(int c) const;
  std::size_t fn(int c) const;
  std::size_t support(int c) const;
  std::size_t total() const;
  bool operator==(const ConfusionMatrix&) const = default;
};

struct Averages {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct MetricsReport {
  ConfusionMatrix confusion;
  double accuracy = 0.0;
  std::array<double, kNumClasses> precision{};
  std::array<double, kNumClasses> recall{};
  std::array<double, kNumClasses> f1{};
  Averages macro;     // unweighted mean over classes
  Averages weighted;  // class-share weighted mean
  Averages micro;     // pooled counts
  // Set when a precision/recall denominator was zero and 0 was reported.
  bool zero_division = false;
  std::vector<std::string> notes;
};

// Throws kValidation on length mismatch, empty input or labels outside {0,1,2}.
MetricsReport compute_metrics(std::span<const int> y_true, std::span<const int> y_pred);

// Named scalar used by importance and search: "accuracy", "macro_f1",
// "weighted_f1", "micro_f1", "macro_precision", "macro_recall".
double metric_value(const MetricsReport& report, const std::string& metric);
bool is_known_metric(const std::string& metric);

struct NamedReport {
  std::string model;
  MetricsReport report;
};

// Model, Accuracy, Precision, Recall, F1 Score with the chosen averaging.
std::string markdown_table(const std::vector<NamedReport>& rows, const std::string& averaging);
std::string metrics_csv(const std::vector<NamedReport>& rows);
std::string per_class_csv(const std::vector<NamedReport>& rows);
std::string confusion_csv(const std::vector<NamedReport>& rows);

}  // namespace neurolos::eval
