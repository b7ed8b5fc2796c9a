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

#include <cstdint>
#include <span>
#include <vector>

#include "neurolos/dataset.hpp"
#include "neurolos/metrics.hpp"

namespace neurolos::eval {

// Fold id per row; each class is shuffled and dealt round-robin over folds.
// Throws kValidation when any present class has fewer rows than folds.
std::vector<int> stratified_folds(std::span<const int> labels, std::size_t k_folds,
                                  std::uint64_t seed);

struct CvOptions {
  std::size_t k_folds = 5;
  std::uint64_t seed = 0;
  std::size_t smote_k = 0;  // 0 disables oversampling inside training folds
  int threads = 1;
};

struct Summary {
  double mean = 0.0;
  double std = 0.0;
};

struct CvResult {
  std::vector<MetricsReport> folds;
  std::vector<int> fold_of_row;
  Summary accuracy;
  Summary macro_f1;
  Summary weighted_f1;
};

CvResult cross_validate(const Dataset& dataset, const ClassifierFactory& factory,
                        const CvOptions& options);

Summary summarize(std::span<const double> values);

}  // namespace neurolos::eval
