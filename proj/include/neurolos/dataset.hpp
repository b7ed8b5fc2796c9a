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
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "neurolos/common.hpp"
#include "neurolos/los.hpp"

namespace neurolos {

// Design matrix with class labels in {0, 1, 2}.
struct Dataset {
  Matrix x;
  std::vector<int> y;
  std::vector<std::string> feature_names;
  std::vector<std::uint8_t> synthetic;  // 1 for oversampled rows
  std::vector<std::int64_t> row_ids;    // stay_id of the (parent) row

  std::size_t rows() const { return y.size(); }
  std::size_t cols() const { return x.cols(); }
  std::size_t n_synthetic() const;
  std::array<std::size_t, kNumClasses> class_counts() const;

  // Finite values, labels in range, consistent sizes.
  void validate() const;

  Dataset subset(std::span<const std::size_t> rows) const;
  Dataset select_features(std::span<const std::size_t> cols) const;
  bool operator==(const Dataset&) const = default;
};

// Builds a Dataset of real rows from a matrix and labels.
Dataset make_dataset(Matrix x, std::vector<int> y, std::vector<std::string> feature_names = {});

// Common surface of the classical models.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual std::string kind() const = 0;
  virtual void fit(const Dataset& train) = 0;
  virtual bool fitted() const = 0;
  virtual std::vector<int> predict(const Matrix& x) const = 0;
  // Per-class scores, rows sum to 1.
  virtual Matrix predict_proba(const Matrix& x) const = 0;
  // Model-intrinsic importance normalised to sum 1, or nullopt when the model
  // has no importance signal.
  virtual std::optional<std::vector<double>> feature_importance() const { return std::nullopt; }
  virtual nlohmann::json to_json() const = 0;
  virtual void set_threads(int /*threads*/) {}
};

using ClassifierFactory = std::function<std::unique_ptr<Classifier>()>;

int argmax(std::span<const double> scores);

}  // namespace neurolos
