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

#include <filesystem>
#include <string>
#include <vector>

#include "neurolos/dataset.hpp"
#include "neurolos/pipeline.hpp"

namespace neurolos::pipeline::detail {

namespace fs = std::filesystem;

// Seed streams derived from the experiment seed.
enum SeedStream : std::uint64_t {
  kSplitStream = 1,
  kSmoteStream = 2,
  kRfeStream = 3,
  kTuneStream = 4,
  kTrainStream = 5,
  kSequenceStream = 6,
  kImportanceStream = 7,
  kCvStream = 8,
};

struct Context {
  const ExperimentConfig& cfg;
  fs::path root;
  std::uint64_t seed = 0;
  int threads = 1;
  bool emit_ddl = false;

  fs::path dir(Stage stage) const { return root / to_string(stage); }
  std::uint64_t stream(std::uint64_t s) const { return derive_seed(seed, s); }
};

void run_generate(const Context& ctx);
void run_ingest(const Context& ctx);
void run_marts(const Context& ctx);
void run_features(const Context& ctx);
void run_tune(const Context& ctx);
void run_train(const Context& ctx);
void run_evaluate(const Context& ctx);
void run_importance(const Context& ctx);
void run_report(const Context& ctx);

// Config sections a stage depends on, for its fingerprint.
nlohmann::json stage_config_slice(const Context& ctx, Stage stage);

// Shared file helpers.
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);
void write_json(const fs::path& path, const nlohmann::json& j);
nlohmann::json read_json(const fs::path& path);
void write_dataset(const fs::path& path, const Dataset& ds);
Dataset read_dataset(const fs::path& path);

// Sequence cells of a model; the full grid when the model lists none.
std::vector<std::pair<std::size_t, std::size_t>> model_cells(const ExperimentConfig& cfg, const ModelBlock& m);
std::string cell_tag(std::size_t window, std::size_t step);

// Per-cell window sets shared by train, evaluate and importance.
struct CellWindows {
  seq::WindowSet train, val, test;
  std::size_t stays_too_short = 0;
  bool usable = false;
  std::string note;
};
CellWindows cell_windows(const Context& ctx, const mart::SeriesMart& events, std::size_t window, std::size_t step);
std::string events_mart_name(const ExperimentConfig& cfg);

// SVG line chart of accuracy against window size, one series per (model, step).
struct GridPoint {
  std::string model;
  std::size_t window = 0;
  std::size_t step = 0;
  double accuracy = 0.0;
  double weighted_f1 = 0.0;
};
std::string grid_svg(const std::vector<GridPoint>& points);

}  // namespace neurolos::pipeline::detail
