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
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "neurolos/dataset.hpp"
#include "neurolos/martstore.hpp"

namespace neurolos::features {

// One-hot encoding of categorical mart columns and z-scoring of numeric ones,
// with every statistic fitted on training rows. Columns that are constant on
// the training rows are dropped and listed in `dropped`.
class FeatureEncoder {
 public:
  static FeatureEncoder fit(const mart::StaticMart& mart, std::span<const std::size_t> train_rows);

  Dataset transform(const mart::StaticMart& mart) const;

  const std::vector<std::string>& feature_names() const { return names_; }
  const std::vector<std::string>& dropped() const { return dropped_; }

  nlohmann::json to_json() const;
  static FeatureEncoder from_json(const nlohmann::json& j);

 private:
  struct Output {
    std::string source;  // mart column
    std::string level;   // one-hot level; empty for numeric
    double mean = 0.0;
    double scale = 1.0;
  };
  std::vector<Output> outputs_;
  std::vector<std::string> names_;
  std::vector<std::string> dropped_;
};

// Fits the encoder on every row and transforms the mart.
Dataset encode_and_scale(const mart::StaticMart& mart, std::vector<std::string>* dropped = nullptr);

struct SplitSpec {
  double test_fraction = 0.2;
  std::uint64_t seed = 0;
  bool stratify = true;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per class, round(count * test_fraction) rows (at least 1, at most count-1)
// go to the test side. Both index lists are sorted.
SplitIndices stratified_split_indices(std::span<const int> labels, const SplitSpec& spec);

// Rejects datasets that already contain synthetic rows.
std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, const SplitSpec& spec);

struct SyntheticOrigin {
  std::size_t base = 0;      // row index in the input dataset
  std::size_t neighbor = 0;  // row index in the input dataset
  double lambda = 0.0;
};

struct SmoteResult {
  Dataset data;  // input rows first, then synthetic rows
  std::vector<SyntheticOrigin> origins;  // one per synthetic row, in order
};

// x_new = x_base + lambda * (x_neighbor - x_base)
std::vector<double> smote_interpolate(std::span<const double> base, std::span<const double> neighbor,
                                      double lambda);

// Upsamples every class to the majority count. Neighbours are the k nearest
// real rows of the same class by Euclidean distance.
SmoteResult smote_oversample(const Dataset& train, std::size_t k_neighbors, std::uint64_t seed);

struct RfeStep {
  std::size_t step = 0;
  std::size_t n_features = 0;
  double macro_f1 = 0.0;
  std::vector<std::size_t> features;  // column indices into the input dataset
};

struct RfeOptions {
  std::size_t step_k = 10;
  std::size_t min_features = 1;
  std::size_t max_features = 0;  // 0 means all
  std::size_t cv_folds = 3;
  std::uint64_t seed = 0;
  std::size_t smote_k = 0;  // 0 disables oversampling inside folds
  int threads = 1;
};

struct RfeResult {
  std::vector<std::size_t> selected;
  std::vector<std::string> selected_names;
  std::vector<RfeStep> trace;
};

// Recursive feature elimination. Throws kUnsupported when the model exposes
// no importance signal.
RfeResult rfe_select(const Dataset& train, const ClassifierFactory& factory,
                     const RfeOptions& options);

std::string rfe_trace_csv(const RfeResult& result);

}  // namespace neurolos::features
