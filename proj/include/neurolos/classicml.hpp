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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "neurolos/dataset.hpp"

namespace neurolos::ml {

inline constexpr int kModelFormatVersion = 1;

enum class Criterion { kGini, kEntropy };

// Impurity of a class-probability vector. Entropy is in bits.
double impurity(std::span<const double> probs, Criterion criterion);

// ---------------------------------------------------------------- KNN

struct KnnConfig {
  std::size_t k = 5;
  enum class Weighting { kUniform, kDistance } weighting = Weighting::kUniform;
  enum class Metric { kEuclidean, kManhattan } metric = Metric::kEuclidean;
  void validate() const;
};

class KnnModel final : public Classifier {
 public:
  explicit KnnModel(KnnConfig cfg = {});
  std::string kind() const override { return "knn"; }
  void fit(const Dataset& train) override;
  bool fitted() const override { return !y_.empty(); }
  std::vector<int> predict(const Matrix& x) const override;
  Matrix predict_proba(const Matrix& x) const override;
  nlohmann::json to_json() const override;
  static std::unique_ptr<KnnModel> from_json(const nlohmann::json& j);
  void set_threads(int threads) override { threads_ = threads; }
  const KnnConfig& config() const { return cfg_; }

 private:
  // Class votes for one query; a zero-distance neighbour outvotes the rest.
  std::array<double, kNumClasses> votes(std::span<const double> q) const;

  KnnConfig cfg_;
  Matrix x_;
  std::vector<int> y_;
  int threads_ = 1;
};

// ---------------------------------------------------------------- trees

struct TreeConfig {
  Criterion criterion = Criterion::kGini;
  std::size_t max_depth = 0;  // 0: unlimited
  std::size_t min_samples_split = 2;
  std::size_t min_samples_leaf = 1;
  enum class MaxFeatures { kAll, kSqrt, kLog2 } max_features = MaxFeatures::kAll;
  std::uint64_t seed = 0;
  void validate() const;
  std::size_t features_per_split(std::size_t n_features) const;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;  // x <= threshold goes left
  int left = -1;
  int right = -1;
  std::array<double, kNumClasses> counts{};
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;  // impurity decrease per sample of the node
};

// Best split of `rows` over `features` (searched in the given order, first
// strictly-best wins). feature == -1 when no admissible split has gain > 0.
SplitChoice best_split(const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows,
                       std::span<const std::size_t> features, Criterion criterion,
                       std::size_t min_samples_leaf);

class DecisionTree final : public Classifier {
 public:
  explicit DecisionTree(TreeConfig cfg = {});
  std::string kind() const override { return "tree"; }
  void fit(const Dataset& train) override;
  // Fits on a row multiset (duplicates allowed) drawing feature subsets from rng.
  void fit_rows(const Matrix& x, std::span<const int> y, std::vector<std::size_t> rows, Rng& rng);
  bool fitted() const override { return !nodes_.empty(); }
  std::vector<int> predict(const Matrix& x) const override;
  Matrix predict_proba(const Matrix& x) const override;
  std::optional<std::vector<double>> feature_importance() const override;
  nlohmann::json to_json() const override;
  static std::unique_ptr<DecisionTree> from_json(const nlohmann::json& j);

  const TreeNode& leaf_for(std::span<const double> row) const;
  const std::vector<TreeNode>& nodes() const { return nodes_; }
  // Unnormalised impurity decrease per feature.
  const std::vector<double>& raw_importance() const { return importance_; }
  std::size_t depth() const;

 private:
  TreeConfig cfg_;
  std::vector<TreeNode> nodes_;
  std::vector<double> importance_;
};

struct ForestConfig {
  std::size_t n_estimators = 100;
  TreeConfig tree;
  bool bootstrap = true;
  std::uint64_t seed = 0;
  void validate() const;
};

class ForestModel final : public Classifier {
 public:
  explicit ForestModel(ForestConfig cfg = {});
  std::string kind() const override { return "forest"; }
  void fit(const Dataset& train) override;
  bool fitted() const override { return !trees_.empty(); }
  std::vector<int> predict(const Matrix& x) const override;
  // Share of tree votes per class.
  Matrix predict_proba(const Matrix& x) const override;
  std::optional<std::vector<double>> feature_importance() const override;
  nlohmann::json to_json() const override;
  static std::unique_ptr<ForestModel> from_json(const nlohmann::json& j);
  void set_threads(int threads) override { threads_ = threads; }

  const std::vector<DecisionTree>& trees() const { return trees_; }

 private:
  ForestConfig cfg_;
  std::vector<DecisionTree> trees_;
  std::size_t n_features_ = 0;
  int threads_ = 1;
};

// ---------------------------------------------------------------- boosting

enum class Growth { kDepthwise, kOblivious };

inline constexpr std::size_t kMaxObliviousDepth = 16;

struct BoostConfig {
  std::size_t n_rounds = 100;
  double learning_rate = 0.1;
  std::size_t max_depth = 6;
  double reg_lambda = 1.0;
  double reg_alpha = 0.0;
  double gamma = 0.0;
  double subsample = 1.0;
  double colsample_bytree = 1.0;
  double min_child_weight = 1.0;
  std::size_t max_bins = 255;
  double bagging_temperature = 0.0;
  double random_strength = 0.0;
  Growth growth = Growth::kDepthwise;
  std::uint64_t seed = 0;
  void validate() const;
};

// Closed-form regularised leaf weight -T_alpha(G) / (H + lambda).
double leaf_weight(double grad_sum, double hess_sum, double lambda, double alpha);
// Structure score contribution T_alpha(G)^2 / (H + lambda).
double leaf_score(double grad_sum, double hess_sum, double lambda, double alpha);

struct RegressionNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // already scaled by the learning rate
};

struct RegressionTree {
  std::vector<RegressionNode> nodes;
  double eval(std::span<const double> row) const;
  std::size_t depth() const;
};

class BoostModel final : public Classifier {
 public:
  explicit BoostModel(BoostConfig cfg = {});
  std::string kind() const override;
  void fit(const Dataset& train) override;
  bool fitted() const override { return fitted_; }
  std::vector<int> predict(const Matrix& x) const override;
  Matrix predict_proba(const Matrix& x) const override;
  Matrix raw_scores(const Matrix& x) const;
  std::optional<std::vector<double>> feature_importance() const override;
  nlohmann::json to_json() const override;
  static std::unique_ptr<BoostModel> from_json(const nlohmann::json& j);
  void set_threads(int threads) override { threads_ = threads; }

  // Softmax cross-entropy on training rows after each round.
  const std::vector<double>& train_loss() const { return train_loss_; }
  const std::array<double, kNumClasses>& base_score() const { return base_; }
  // trees()[round][class]
  const std::vector<std::array<RegressionTree, kNumClasses>>& trees() const { return trees_; }

 private:
  BoostConfig cfg_;
  bool fitted_ = false;
  std::array<double, kNumClasses> base_{};
  std::vector<std::array<RegressionTree, kNumClasses>> trees_;
  std::vector<double> gain_;
  std::vector<double> train_loss_;
  int threads_ = 1;
};

// ---------------------------------------------------------------- SVM

struct SvmConfig {
  double c = 1.0;
  std::size_t epochs = 50;
  std::uint64_t seed = 0;
  void validate() const;
};

class SvmModel final : public Classifier {
 public:
  explicit SvmModel(SvmConfig cfg = {});
  std::string kind() const override { return "svm"; }
  void fit(const Dataset& train) override;
  bool fitted() const override { return !w_.empty(); }
  std::vector<int> predict(const Matrix& x) const override;
  // Softmax over decision values.
  Matrix predict_proba(const Matrix& x) const override;
  Matrix decision_function(const Matrix& x) const;
  // Summed |w| per feature over the one-vs-rest heads, normalised.
  std::optional<std::vector<double>> feature_importance() const override;
  nlohmann::json to_json() const override;
  static std::unique_ptr<SvmModel> from_json(const nlohmann::json& j);
  void set_threads(int threads) override { threads_ = threads; }

  std::span<const double> weights(int cls) const;
  double bias(int cls) const { return b_[cls]; }

 private:
  SvmConfig cfg_;
  std::vector<double> w_;  // kNumClasses x n_features
  std::array<double, kNumClasses> b_{};
  std::size_t n_features_ = 0;
  int threads_ = 1;
};

// ---------------------------------------------------------------- registry

// Classic kinds accepted by make_classifier.
const std::vector<std::string>& classic_kinds();
bool is_classic_kind(const std::string& kind);

// Builds an unfitted model. Unknown kinds or parameters raise kConfig naming
// the offending key.
std::unique_ptr<Classifier> make_classifier(const std::string& kind, const nlohmann::json& params,
                                            std::uint64_t seed);
ClassifierFactory classifier_factory(const std::string& kind, const nlohmann::json& params,
                                     std::uint64_t seed, int threads = 1);

// Versioned model file: {"format", "version", "kind", "config", "params"}.
void save_model(const Classifier& model, const std::string& path);
std::unique_ptr<Classifier> load_model(const std::string& path);
std::unique_ptr<Classifier> model_from_json(const nlohmann::json& j);

}  // namespace neurolos::ml
