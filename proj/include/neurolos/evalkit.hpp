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
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "neurolos/dataset.hpp"
#include "neurolos/metrics.hpp"
#include "neurolos/validation.hpp"

namespace neurolos::eval {

// ---------------------------------------------------------------- importance

struct ImportanceResult {
  std::string metric;
  double baseline = 0.0;
  std::vector<std::string> names;
  std::vector<double> mean;  // baseline - mean permuted score
  std::vector<double> std;
  // Indices sorted by descending mean drop, ties by index.
  std::vector<std::size_t> ranking() const;
};

// Scores the evaluation set with feature group `group` permuted by `perm`
// (perm[i] is the row whose values replace row i).
using PermutedScore = std::function<double(std::size_t group, std::span<const std::size_t> perm)>;

// Shared driver: each group is shuffled n_repeats times with streams keyed by
// (seed, group, repeat), so results do not depend on thread count.
ImportanceResult permutation_importance(std::vector<std::string> group_names, std::size_t n_rows,
                                        double baseline, const PermutedScore& score,
                                        std::size_t n_repeats, std::uint64_t seed, int threads = 1);

// Tabular form: one group per column of eval.x.
ImportanceResult permutation_importance(const Classifier& model, const Dataset& eval,
                                        const std::string& metric, std::size_t n_repeats,
                                        std::uint64_t seed, int threads = 1);

std::string importance_csv(const ImportanceResult& result);

// ---------------------------------------------------------------- search

struct ParamDomain {
  enum class Kind { kInt, kReal, kCategorical };
  std::string name;
  Kind kind = Kind::kReal;
  double low = 0.0;
  double high = 1.0;
  bool log = false;
  std::vector<nlohmann::json> choices;

  nlohmann::json sample(Rng& rng) const;
  bool contains(const nlohmann::json& value) const;
};

// JSON form: {"name": {"type": "int"|"real"|"categorical", "low", "high",
// "log", "choices"}}. Parameters are sampled in name order.
struct SearchSpace {
  std::vector<ParamDomain> params;

  static SearchSpace from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
  nlohmann::json sample(Rng& rng) const;
  bool contains(const nlohmann::json& config) const;
};

struct PruningConfig {
  bool enabled = false;
  // Resource fractions of the rungs before the full evaluation, ascending in (0, 1).
  std::vector<double> rungs{0.25, 0.5};
  double keep_fraction = 0.5;
};

enum class TrialStatus { kComplete, kPruned, kFailed };
const char* to_string(TrialStatus status);

struct Trial {
  std::size_t id = 0;
  nlohmann::json params;
  std::vector<double> rung_scores;
  double score = std::numeric_limits<double>::quiet_NaN();
  TrialStatus status = TrialStatus::kComplete;
  std::string error;
};

struct SearchResult {
  std::vector<Trial> trials;
  std::size_t best = 0;  // index into trials
  const Trial& best_trial() const { return trials[best]; }
};

// Objective to maximise given sampled parameters and a resource fraction in (0, 1].
using Objective = std::function<double(const nlohmann::json& params, double resource)>;

// All configurations are drawn up front from `seed`; rungs run synchronously
// and keep the top keep_fraction (at least one) of the surviving trials.
SearchResult random_search(const SearchSpace& space, const Objective& objective, std::size_t budget,
                           std::uint64_t seed, const PruningConfig& pruning = {}, int threads = 1);

// trial_id, params (flattened as param_<name>), rung scores, score, status.
std::string trial_log_csv(const SearchResult& result, const SearchSpace& space,
                          const PruningConfig& pruning);

// Reference tuning ranges for each classic kind.
SearchSpace default_search_space(const std::string& kind);

}  // namespace neurolos::eval
