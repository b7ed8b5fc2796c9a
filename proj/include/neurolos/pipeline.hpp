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
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "neurolos/evalkit.hpp"
#include "neurolos/los.hpp"
#include "neurolos/seqml.hpp"
#include "neurolos/synthgen.hpp"

namespace neurolos::pipeline {

inline constexpr int kManifestVersion = 1;
inline constexpr const char* kVersion = "0.1.0";

// ---------------------------------------------------------------- config

struct RfeConfig {
  bool enabled = false;
  std::size_t step = 10;
  std::size_t min_features = 5;
  std::size_t max_features = 0;
  std::size_t cv_folds = 3;
  std::string kind = "forest";
  nlohmann::json params = nlohmann::json::object();
};

struct ModelBlock {
  std::string name;   // [a-z0-9_-]+, used for file names
  std::string label;  // report display name
  std::string kind;
  nlohmann::json params = nlohmann::json::object();

  // Classic kinds: optional hyperparameter search.
  bool tuned = false;
  eval::SearchSpace space;
  std::size_t budget = 0;
  eval::PruningConfig pruning;
  std::size_t search_folds = 3;

  // Sequence kinds.
  seq::TrainConfig training;
  std::vector<std::pair<std::size_t, std::size_t>> cells;  // (window, step); empty: full grid

  bool is_sequence() const { return kind == "lstm" || kind == "encoder"; }
};

struct SequenceOptions {
  std::vector<std::size_t> window_sizes = {16, 32, 64};
  std::vector<std::size_t> step_sizes = {8, 16};
  double val_fraction = 0.2;
  std::size_t max_train_windows = 0;  // 0: no cap
  std::size_t max_eval_windows = 0;
};

struct ImportanceOptions {
  bool enabled = true;
  std::size_t n_repeats = 5;
  std::string metric = "accuracy";
};

struct EvalOptions {
  std::size_t folds = 5;  // cross-validation on the training split; 0 disables
  std::string tune_metric = "macro_f1";
  std::string averaging = "weighted";
  ImportanceOptions importance;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::uint64_t seed = 42;
  int threads = 1;
  std::string output_dir;

  std::optional<synth::CohortSpec> synthetic;
  std::string raw_dir;

  std::vector<std::string> tests;  // empty: the generator's catalog
  BinEdges bin_edges;
  double aggregation_hours = 24.0;
  std::string sequence_source = "events";  // or "minutes"

  double test_fraction = 0.2;
  bool smote = true;
  std::size_t smote_k = 5;
  RfeConfig rfe;

  std::vector<ModelBlock> models;
  SequenceOptions sequence;
  EvalOptions eval;

  nlohmann::json source;  // the parsed document, used for stage fingerprints

  const ModelBlock* find_model(const std::string& name) const;
};

// Field-level validation; every problem is reported, one per line, in a kConfig error.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// ---------------------------------------------------------------- runs

enum class Stage { kGenerate, kIngest, kMarts, kFeatures, kTune, kTrain, kEvaluate, kImportance, kReport };

const std::vector<Stage>& all_stages();
std::string to_string(Stage stage);
Stage stage_from_string(const std::string& name);
// "all" or a comma-separated list, returned in pipeline order.
std::vector<Stage> parse_stage_list(const std::string& text);

struct RunOptions {
  std::string out;                     // overrides the config's output_dir when non-empty
  std::optional<std::uint64_t> seed;   // overrides the experiment seed
  std::optional<int> threads;
  bool emit_ddl = false;
};

struct StageOutcome {
  Stage stage;
  bool skipped = false;  // outputs already up to date
  double seconds = 0.0;
};

struct RunSummary {
  std::string out_dir;
  std::vector<StageOutcome> stages;
};

// Output root: options.out, else $NEUROLOS_OUT, else config.output_dir, else "neurolos-out".
std::string resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& options);

// Runs the stages in pipeline order. A stage whose inputs and outputs match
// its stamp is skipped; earlier stages must have completed.
RunSummary run_stages(const ExperimentConfig& cfg, const std::vector<Stage>& stages,
                      const RunOptions& options = {});

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::string& path);

}  // namespace neurolos::pipeline
