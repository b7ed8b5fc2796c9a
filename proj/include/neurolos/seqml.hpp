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
#include <string>
#include <vector>

#include "json.hpp"
#include "neurolos/common.hpp"
#include "neurolos/los.hpp"
#include "neurolos/martstore.hpp"

namespace neurolos::seq {

// ---------------------------------------------------------------- windows

// Dense per-stay channels: for each test value, in_norm and mask, then the
// elapsed time in days since the stay's first row.
struct FilledStay {
  std::int64_t stay_id = 0;
  Matrix channels;
  std::vector<double> remaining_los_days;
};

std::vector<std::string> channel_names(const mart::MartMeta& meta);

// Population fill values per test: median of observed numeric values, most
// frequent level code for categorical tests (smallest code on ties).
std::vector<double> population_fill(const mart::SeriesMart& mart);

// Rows [begin, end) of one stay, time ordered. Numeric values are linearly
// interpolated in time and held constant outside the observed span;
// categorical codes and in-norm flags are carried forward (and back before
// the first observation). Never-observed tests take the population fill,
// in_norm 1 and mask 0.
FilledStay fill_series(const mart::SeriesMart& mart, std::size_t begin, std::size_t end,
                       std::span<const double> fill);

inline std::size_t window_count(std::size_t length, std::size_t window, std::size_t step) {
  return length < window ? 0 : (length - window) / step + 1;
}

struct WindowSet {
  std::size_t window = 0;
  std::vector<std::string> channel_names;
  std::vector<Matrix> x;  // window x channels each
  std::vector<int> y;
  std::vector<std::int64_t> stay_id;
  std::vector<std::size_t> start;
  std::size_t stays_too_short = 0;

  std::size_t size() const { return y.size(); }
  std::size_t channels() const { return channel_names.size(); }
  WindowSet subset(std::span<const std::size_t> idx) const;
  std::array<std::size_t, kNumClasses> class_counts() const;
};

// Windows at offsets 0, step, 2*step, ... of one filled stay; the label is the
// class of the remaining stay at the window's last row.
void make_windows(const FilledStay& stay, std::size_t window, std::size_t step, WindowSet& out,
                  const BinEdges& edges = {});

// Fills every stay of the mart and cuts windows, in stay order.
WindowSet build_windows(const mart::SeriesMart& mart, std::size_t window, std::size_t step,
                        int threads = 1);

// Whole stays go to one side; about val_fraction of the stays land in validation.
std::pair<WindowSet, WindowSet> split_by_stay(const WindowSet& all, double val_fraction,
                                              std::uint64_t seed);

// Deterministic cap on the number of windows (no-op when max == 0 or size <= max).
WindowSet cap_windows(const WindowSet& set, std::size_t max, std::uint64_t seed);

// Planted-signal set: channel 0 has mean (class - 1) * separation plus unit
// noise; the remaining channels are pure noise. Each sample is its own stay.
WindowSet planted_windows(std::size_t n, std::size_t window, std::size_t channels,
                          double separation, std::uint64_t seed);

// ---------------------------------------------------------------- models

// Row-major parameter tensor.
struct Tensor {
  std::string name;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::string n, std::size_t r, std::size_t c) : name(std::move(n)), rows(r), cols(c), data(r * c, 0.0) {}
  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

class SequenceModel {
 public:
  virtual ~SequenceModel() = default;
  virtual std::string kind() const = 0;
  std::size_t input_channels() const { return channels_; }

  // Class scores of one standardised window.
  virtual std::array<double, kNumClasses> logits(const Matrix& window) const = 0;
  // Cross-entropy of one standardised window; adds its gradient into grads.
  virtual double loss_and_grad(const Matrix& window, int label, std::vector<Tensor>& grads) const = 0;

  std::vector<Tensor>& params() { return params_; }
  const std::vector<Tensor>& params() const { return params_; }
  std::vector<Tensor> zero_like() const;
  std::size_t n_parameters() const;

  void fit_standardization(const WindowSet& train);
  Matrix standardize(const Matrix& window) const;
  const std::vector<double>& channel_mean() const { return mean_; }
  const std::vector<double>& channel_scale() const { return scale_; }

  // Softmax probabilities for every window of the set (standardised here).
  Matrix predict_proba(const WindowSet& set, int threads = 1) const;
  std::vector<int> predict(const WindowSet& set, int threads = 1) const;

  nlohmann::json to_json() const;

 protected:
  explicit SequenceModel(std::size_t channels) : channels_(channels) {}
  virtual nlohmann::json config_json() const = 0;

  std::size_t channels_;
  std::vector<Tensor> params_;
  std::vector<double> mean_;
  std::vector<double> scale_;

  friend std::unique_ptr<SequenceModel> sequence_model_from_json(const nlohmann::json& j);
};

struct LstmConfig {
  std::size_t hidden = 64;
  std::uint64_t seed = 0;
  void validate() const;
};

class LstmModel final : public SequenceModel {
 public:
  LstmModel(std::size_t channels, LstmConfig cfg);
  std::string kind() const override { return "lstm"; }
  std::array<double, kNumClasses> logits(const Matrix& window) const override;
  double loss_and_grad(const Matrix& window, int label, std::vector<Tensor>& grads) const override;

  struct Trace {
    Matrix h;       // T x hidden
    Matrix c;       // cell state
    Matrix c_cand;  // candidate cell values
  };
  Trace trace(const Matrix& window) const;
  const LstmConfig& config() const { return cfg_; }

 private:
  nlohmann::json config_json() const override;
  LstmConfig cfg_;
};

struct EncoderConfig {
  std::size_t d_model = 64;
  std::size_t n_heads = 16;
  std::size_t n_blocks = 4;
  std::size_t d_ff = 0;  // 0: 4 * d_model
  std::size_t max_len = 2048;
  bool positional = true;
  std::uint64_t seed = 0;
  void validate() const;
  std::size_t ffn_width() const { return d_ff == 0 ? 4 * d_model : d_ff; }
};

class EncoderModel final : public SequenceModel {
 public:
  EncoderModel(std::size_t channels, EncoderConfig cfg);
  std::string kind() const override { return "encoder"; }
  std::array<double, kNumClasses> logits(const Matrix& window) const override;
  double loss_and_grad(const Matrix& window, int label, std::vector<Tensor>& grads) const override;

  // Attention weights [block][head], each window x window.
  std::vector<std::vector<Matrix>> attention(const Matrix& window) const;
  const EncoderConfig& config() const { return cfg_; }

 private:
  nlohmann::json config_json() const override;
  EncoderConfig cfg_;
};

std::unique_ptr<SequenceModel> sequence_model_from_json(const nlohmann::json& j);
void save_sequence_model(const SequenceModel& model, const std::string& path);
std::unique_ptr<SequenceModel> load_sequence_model(const std::string& path);

// Builds "lstm" or "encoder" from a JSON parameter block; unknown keys raise kConfig.
std::unique_ptr<SequenceModel> make_sequence_model(const std::string& kind, std::size_t channels,
                                                   const nlohmann::json& params, std::uint64_t seed);

// ---------------------------------------------------------------- training

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  double learning_rate = 1e-4;
  enum class Optimizer { kSgd, kAdam } optimizer = Optimizer::kAdam;
  double clip_norm = 5.0;  // 0 disables global-norm clipping
  std::size_t patience = 0;  // 0 disables early stopping
  std::uint64_t seed = 0;
  int threads = 1;
  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // parameters are restored to this epoch when early stopping
};

// Fits channel standardisation on train, then runs minibatch training. Batch
// gradients are summed in sample order, so thread count does not change results.
TrainResult train_sequence_model(SequenceModel& model, const WindowSet& train, const WindowSet& val,
                                 const TrainConfig& cfg);

std::string history_csv(const TrainResult& result);

// Mean cross-entropy and accuracy of a set.
std::pair<double, double> evaluate_loss(const SequenceModel& model, const WindowSet& set, int threads = 1);

// Central finite-difference check: max over all parameters of
// |analytic - numeric| / max(|analytic| + |numeric|, floor).
double gradient_check(SequenceModel& model, const std::vector<Matrix>& windows,
                      const std::vector<int>& labels, double h = 1e-5, double floor = 1e-8);

}  // namespace neurolos::seq
