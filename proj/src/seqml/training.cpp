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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "neurolos/csv.hpp"
#include "neurolos/dataset.hpp"
#include "neurolos/seqml.hpp"

namespace neurolos::seq {

void TrainConfig::validate() const {
  require(epochs >= 1, ErrorKind::kConfig, "training.epochs must be >= 1");
  require(batch_size >= 1, ErrorKind::kConfig, "training.batch_size must be >= 1");
  require(std::isfinite(learning_rate) && learning_rate >= 0.0, ErrorKind::kConfig,
          "training.learning_rate must be a finite value >= 0");
  require(std::isfinite(clip_norm) && clip_norm >= 0.0, ErrorKind::kConfig,
          "training.clip_norm must be >= 0");
}

namespace {

double log_loss_row(std::span<const double> p, int label) { return -std::log(std::max(p[label], 1e-300)); }

class Adam {
 public:
  explicit Adam(const std::vector<Tensor>& like) {
    for (const auto& t : like) {
      m_.emplace_back(t.data.size(), 0.0);
      v_.emplace_back(t.data.size(), 0.0);
    }
  }

  void step(std::vector<Tensor>& params, const std::vector<Tensor>& grads, double lr) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto& p = params[i].data;
      const auto& g = grads[i].data;
      for (std::size_t j = 0; j < p.size(); ++j) {
        m_[i][j] = kBeta1 * m_[i][j] + (1.0 - kBeta1) * g[j];
        v_[i][j] = kBeta2 * v_[i][j] + (1.0 - kBeta2) * g[j] * g[j];
        p[j] -= lr * (m_[i][j] / c1) / (std::sqrt(v_[i][j] / c2) + kEps);
      }
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  std::vector<std::vector<double>> m_, v_;
  long t_ = 0;
};

bool all_finite(const std::vector<Tensor>& ts) {
  for (const auto& t : ts) {
    for (double v : t.data) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

}  // namespace

std::pair<double, double> evaluate_loss(const SequenceModel& model, const WindowSet& set, int threads) {
  if (set.size() == 0) return {0.0, 0.0};
  const Matrix p = model.predict_proba(set, threads);
  double loss = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < set.size(); ++i) {
    loss += log_loss_row(p.row(i), set.y[i]);
    hits += argmax(p.row(i)) == set.y[i] ? 1 : 0;
  }
  const auto n = static_cast<double>(set.size());
  return {loss / n, static_cast<double>(hits) / n};
}

TrainResult train_sequence_model(SequenceModel& model, const WindowSet& train, const WindowSet& val,
                                 const TrainConfig& cfg) {
  cfg.validate();
  require(train.size() > 0, ErrorKind::kData, "no training windows");
  require(train.channels() == model.input_channels(), ErrorKind::kValidation,
          "training windows have " + std::to_string(train.channels()) + " channels, model expects " +
              std::to_string(model.input_channels()));
  model.fit_standardization(train);
  std::vector<Matrix> xs(train.size());
  parallel_for(train.size(), cfg.threads, [&](std::size_t i) { xs[i] = model.standardize(train.x[i]); });

  Adam adam(model.params());
  Rng rng = make_rng(cfg.seed, 0x7a1);
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});

  TrainResult result;
  std::vector<Tensor> best = model.params();
  double best_val = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const bool use_val = val.size() > 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t b0 = 0; b0 < order.size(); b0 += cfg.batch_size) {
      const std::size_t nb = std::min(cfg.batch_size, order.size() - b0);
      // Per-sample buffers summed in sample order keep results thread-count independent.
      std::vector<std::vector<Tensor>> per(nb);
      std::vector<double> losses(nb);
      parallel_for(nb, cfg.threads, [&](std::size_t s) {
        per[s] = model.zero_like();
        const std::size_t i = order[b0 + s];
        losses[s] = model.loss_and_grad(xs[i], train.y[i], per[s]);
      });
      std::vector<Tensor> grads = model.zero_like();
      for (std::size_t s = 0; s < nb; ++s) {
        epoch_loss += losses[s];
        for (std::size_t t = 0; t < grads.size(); ++t) {
          for (std::size_t j = 0; j < grads[t].data.size(); ++j) grads[t].data[j] += per[s][t].data[j];
        }
      }
      double sq = 0.0;
      for (auto& g : grads) {
        for (auto& v : g.data) {
          v /= static_cast<double>(nb);
          sq += v * v;
        }
      }
      const double norm = std::sqrt(sq);
      if (!std::isfinite(norm)) {
        fail(ErrorKind::kTraining, model.kind() + " training diverged at epoch " + std::to_string(epoch) +
                                       " (non-finite gradient)");
      }
      if (cfg.clip_norm > 0.0 && norm > cfg.clip_norm) {
        for (auto& g : grads) {
          for (auto& v : g.data) v *= cfg.clip_norm / norm;
        }
      }
      if (cfg.learning_rate == 0.0) continue;
      if (cfg.optimizer == TrainConfig::Optimizer::kAdam) {
        adam.step(model.params(), grads, cfg.learning_rate);
      } else {
        for (std::size_t t = 0; t < grads.size(); ++t) {
          auto& p = model.params()[t].data;
          for (std::size_t j = 0; j < p.size(); ++j) p[j] -= cfg.learning_rate * grads[t].data[j];
        }
      }
    }
    if (!all_finite(model.params())) {
      fail(ErrorKind::kTraining, model.kind() + " training diverged at epoch " + std::to_string(epoch) +
                                     " (non-finite parameters)");
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = epoch_loss / static_cast<double>(train.size());
    if (use_val) std::tie(rec.val_loss, rec.val_accuracy) = evaluate_loss(model, val, cfg.threads);
    result.history.push_back(rec);

    const double monitored = use_val ? rec.val_loss : rec.train_loss;
    if (monitored < best_val) {
      best_val = monitored;
      result.best_epoch = epoch;
      since_best = 0;
      if (cfg.patience > 0) best = model.params();
    } else if (cfg.patience > 0 && ++since_best >= cfg.patience) {
      break;
    }
  }
  if (cfg.patience > 0 && result.best_epoch > 0) model.params() = best;
  return result;
}

std::string history_csv(const TrainResult& result) {
  std::ostringstream out;
  csv::write_row(out, {"epoch", "train_loss", "val_loss", "val_accuracy"});
  for (const auto& r : result.history) {
    csv::write_row(out, {std::to_string(r.epoch), format_double(r.train_loss), format_double(r.val_loss),
                         format_double(r.val_accuracy)});
  }
  return out.str();
}

double gradient_check(SequenceModel& model, const std::vector<Matrix>& windows, const std::vector<int>& labels,
                      double h, double floor) {
  require(windows.size() == labels.size() && !windows.empty(), ErrorKind::kValidation,
          "gradient_check needs matching, non-empty windows and labels");
  auto total_loss = [&] {
    std::vector<Tensor> scratch = model.zero_like();
    double l = 0.0;
    for (std::size_t i = 0; i < windows.size(); ++i) l += model.loss_and_grad(windows[i], labels[i], scratch);
    return l;
  };
  std::vector<Tensor> analytic = model.zero_like();
  for (std::size_t i = 0; i < windows.size(); ++i) model.loss_and_grad(windows[i], labels[i], analytic);

  double worst = 0.0;
  auto& params = model.params();
  for (std::size_t t = 0; t < params.size(); ++t) {
    for (std::size_t j = 0; j < params[t].data.size(); ++j) {
      const double saved = params[t].data[j];
      params[t].data[j] = saved + h;
      const double up = total_loss();
      params[t].data[j] = saved - h;
      const double down = total_loss();
      params[t].data[j] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[t].data[j];
      worst = std::max(worst, std::abs(a - numeric) / std::max(std::abs(a) + std::abs(numeric), floor));
    }
  }
  return worst;
}

}  // namespace neurolos::seq
