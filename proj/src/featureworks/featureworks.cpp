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

#include "neurolos/featureworks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

#include "neurolos/csv.hpp"
#include "neurolos/validation.hpp"

namespace neurolos::features {

FeatureEncoder FeatureEncoder::fit(const mart::StaticMart& mart,
                                   std::span<const std::size_t> train_rows) {
  require(mart.rows() > 0, ErrorKind::kData, "cannot encode an empty mart");
  require(!train_rows.empty(), ErrorKind::kData, "encoder needs at least one training row");
  FeatureEncoder enc;
  const double n = static_cast<double>(train_rows.size());
  for (const auto& col : mart.features) {
    if (col.type == mart::ColumnType::kCategorical) {
      std::set<std::string> levels;
      for (auto r : train_rows) levels.insert(col.labels[r]);
      if (levels.size() < 2) {
        enc.dropped_.push_back(col.name);
        continue;
      }
      for (const auto& level : levels) {
        enc.outputs_.push_back({col.name, level, 0.0, 1.0});
        enc.names_.push_back(col.name + "=" + level);
      }
      continue;
    }
    double mean = 0.0;
    for (auto r : train_rows) mean += col.numbers[r];
    mean /= n;
    double var = 0.0;
    for (auto r : train_rows) var += (col.numbers[r] - mean) * (col.numbers[r] - mean);
    double sd = std::sqrt(var / n);
    if (!(sd > 1e-12)) {
      enc.dropped_.push_back(col.name);
      continue;
    }
    enc.outputs_.push_back({col.name, "", mean, sd});
    enc.names_.push_back(col.name);
  }
  require(!enc.outputs_.empty(), ErrorKind::kData, "every mart column is constant on training rows");
  return enc;
}

Dataset FeatureEncoder::transform(const mart::StaticMart& mart) const {
  Dataset ds;
  ds.feature_names = names_;
  ds.x = Matrix(mart.rows(), outputs_.size());
  std::vector<const mart::Column*> source(outputs_.size());
  for (std::size_t j = 0; j < outputs_.size(); ++j) {
    source[j] = &mart.feature(outputs_[j].source);
  }
  for (std::size_t r = 0; r < mart.rows(); ++r) {
    for (std::size_t j = 0; j < outputs_.size(); ++j) {
      const auto& o = outputs_[j];
      const auto* col = source[j];
      if (o.level.empty()) {
        ds.x(r, j) = (col->numbers[r] - o.mean) / o.scale;
      } else {
        ds.x(r, j) = col->labels[r] == o.level ? 1.0 : 0.0;
      }
    }
    ds.y.push_back(static_cast<int>(mart.label[r]));
    ds.synthetic.push_back(0);
    ds.row_ids.push_back(mart.stay_id[r]);
  }
  ds.validate();
  return ds;
}

nlohmann::json FeatureEncoder::to_json() const {
  nlohmann::json outs = nlohmann::json::array();
  for (const auto& o : outputs_) {
    outs.push_back({{"source", o.source}, {"level", o.level}, {"mean", o.mean}, {"scale", o.scale}});
  }
  return {{"outputs", outs}, {"names", names_}, {"dropped", dropped_}};
}

FeatureEncoder FeatureEncoder::from_json(const nlohmann::json& j) {
  FeatureEncoder enc;
  for (const auto& o : j.at("outputs")) {
    enc.outputs_.push_back({o.at("source").get<std::string>(), o.at("level").get<std::string>(),
                            o.at("mean").get<double>(), o.at("scale").get<double>()});
  }
  enc.names_ = j.at("names").get<std::vector<std::string>>();
  enc.dropped_ = j.at("dropped").get<std::vector<std::string>>();
  return enc;
}

Dataset encode_and_scale(const mart::StaticMart& mart, std::vector<std::string>* dropped) {
  require(mart.rows() > 0, ErrorKind::kData, "cannot encode an empty mart");
  std::vector<std::size_t> all(mart.rows());
  std::iota(all.begin(), all.end(), 0);
  auto enc = FeatureEncoder::fit(mart, all);
  if (dropped) *dropped = enc.dropped();
  return enc.transform(mart);
}

SplitIndices stratified_split_indices(std::span<const int> labels, const SplitSpec& spec) {
  require(spec.test_fraction > 0.0 && spec.test_fraction < 1.0, ErrorKind::kValidation,
          "SplitSpec.test_fraction must lie in (0, 1)");
  Rng rng = make_rng(spec.seed, 0x5b11);
  SplitIndices out;
  auto take = [&](std::vector<std::size_t> idx) {
    std::shuffle(idx.begin(), idx.end(), rng);
    auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(idx.size()) * spec.test_fraction));
    n_test = std::clamp<std::size_t>(n_test, 1, idx.size() - 1);
    out.test.insert(out.test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  };
  if (spec.stratify) {
    for (int c = 0; c < kNumClasses; ++c) {
      std::vector<std::size_t> idx;
      for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == c) idx.push_back(i);
      }
      if (idx.empty()) continue;
      require(idx.size() >= 2, ErrorKind::kValidation,
              "class " + std::string(to_string(static_cast<LosClass>(c))) +
                  " has fewer than 2 rows; cannot split");
      take(std::move(idx));
    }
  } else {
    require(labels.size() >= 2, ErrorKind::kValidation, "need at least 2 rows to split");
    std::vector<std::size_t> idx(labels.size());
    std::iota(idx.begin(), idx.end(), 0);
    take(std::move(idx));
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& ds, const SplitSpec& spec) {
  require(ds.n_synthetic() == 0, ErrorKind::kValidation,
          "split before oversampling: dataset already contains synthetic rows");
  auto idx = stratified_split_indices(ds.y, spec);
  return {ds.subset(idx.train), ds.subset(idx.test)};
}

std::vector<double> smote_interpolate(std::span<const double> base, std::span<const double> neighbor,
                                      double lambda) {
  std::vector<double> out(base.size());
  for (std::size_t j = 0; j < base.size(); ++j) out[j] = base[j] + lambda * (neighbor[j] - base[j]);
  return out;
}

SmoteResult smote_oversample(const Dataset& train, std::size_t k_neighbors, std::uint64_t seed) {
  train.validate();
  require(k_neighbors >= 1, ErrorKind::kValidation, "SMOTE k_neighbors must be >= 1");
  auto counts = train.class_counts();
  const std::size_t majority = *std::max_element(counts.begin(), counts.end());

  SmoteResult res;
  res.data = train;
  for (int c = 0; c < kNumClasses; ++c) {
    const std::size_t need = majority - counts[c];
    if (need == 0 || counts[c] == 0) continue;
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < train.rows(); ++i) {
      if (train.y[i] == c && !train.synthetic[i]) pool.push_back(i);
    }
    require(pool.size() > k_neighbors, ErrorKind::kValidation,
            "class " + std::string(to_string(static_cast<LosClass>(c))) + " has " +
                std::to_string(pool.size()) + " real rows, not more than k_neighbors=" +
                std::to_string(k_neighbors) + "; use a smaller k");

    // k nearest same-class neighbours of every pool member (ties by index).
    std::vector<std::vector<std::size_t>> neighbors(pool.size());
    std::vector<std::pair<double, std::size_t>> dist(pool.size());
    for (std::size_t a = 0; a < pool.size(); ++a) {
      auto xa = train.x.row(pool[a]);
      for (std::size_t b = 0; b < pool.size(); ++b) {
        double d = 0.0;
        if (a == b) {
          d = std::numeric_limits<double>::infinity();
        } else {
          auto xb = train.x.row(pool[b]);
          for (std::size_t j = 0; j < xa.size(); ++j) d += (xa[j] - xb[j]) * (xa[j] - xb[j]);
        }
        dist[b] = {d, b};
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k_neighbors),
                        dist.end());
      for (std::size_t k = 0; k < k_neighbors; ++k) neighbors[a].push_back(pool[dist[k].second]);
    }

    Rng rng = make_rng(seed, static_cast<std::uint64_t>(c));
    std::uniform_int_distribution<std::size_t> pick_base(0, pool.size() - 1);
    std::uniform_int_distribution<std::size_t> pick_nb(0, k_neighbors - 1);
    std::uniform_real_distribution<double> pick_lambda(0.0, 1.0);
    for (std::size_t s = 0; s < need; ++s) {
      std::size_t a = pick_base(rng);
      std::size_t nb = neighbors[a][pick_nb(rng)];
      double lambda = pick_lambda(rng);
      auto row = smote_interpolate(train.x.row(pool[a]), train.x.row(nb), lambda);
      res.data.x.append_row(row);
      res.data.y.push_back(c);
      res.data.synthetic.push_back(1);
      res.data.row_ids.push_back(train.row_ids[pool[a]]);
      res.origins.push_back({pool[a], nb, lambda});
    }
  }
  return res;
}

RfeResult rfe_select(const Dataset& train, const ClassifierFactory& factory,
                     const RfeOptions& options) {
  const std::size_t p = train.cols();
  require(options.step_k >= 1, ErrorKind::kValidation, "RFE step_k must be >= 1");
  require(options.step_k < p, ErrorKind::kValidation,
          "RFE step_k=" + std::to_string(options.step_k) + " would eliminate all " +
              std::to_string(p) + " features");
  const std::size_t max_f = options.max_features == 0 ? p : options.max_features;
  require(options.min_features >= 1 && options.min_features <= max_f && max_f <= p,
          ErrorKind::kValidation, "RFE target range must lie within [1, n_features]");

  RfeResult res;
  std::vector<std::size_t> current(p);
  std::iota(current.begin(), current.end(), 0);
  for (std::size_t step = 0;; ++step) {
    Dataset sub = train.select_features(current);
    auto model = factory();
    model->set_threads(options.threads);
    model->fit(options.smote_k > 0 ? smote_oversample(sub, options.smote_k, options.seed).data : sub);
    auto importance = model->feature_importance();
    require(importance.has_value(), ErrorKind::kUnsupported,
            "model '" + model->kind() + "' has no feature-importance signal; RFE is unsupported");
    const std::size_t n = current.size();
    if (n <= max_f) {
      eval::CvOptions cv{options.cv_folds, options.seed, options.smote_k, options.threads};
      auto result = eval::cross_validate(sub, factory, cv);
      require(std::isfinite(result.macro_f1.mean), ErrorKind::kTraining, "non-finite RFE score");
      res.trace.push_back({step, n, result.macro_f1.mean, current});
    }
    if (n <= options.min_features) break;
    const std::size_t next = std::max(n - std::min(n, options.step_k), options.min_features);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Ascending importance; among equals the later column goes first.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if ((*importance)[a] != (*importance)[b]) return (*importance)[a] < (*importance)[b];
      return a > b;
    });
    std::vector<bool> drop(n, false);
    for (std::size_t i = 0; i < n - next; ++i) drop[order[i]] = true;
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < n; ++i) {
      if (!drop[i]) kept.push_back(current[i]);
    }
    current = std::move(kept);
  }
  require(!res.trace.empty(), ErrorKind::kValidation, "RFE evaluated no feature set in the target range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < res.trace.size(); ++i) {
    // Later entries are smaller sets, so >= prefers them on ties.
    if (res.trace[i].macro_f1 >= res.trace[best].macro_f1) best = i;
  }
  res.selected = res.trace[best].features;
  for (auto c : res.selected) res.selected_names.push_back(train.feature_names[c]);
  return res;
}

std::string rfe_trace_csv(const RfeResult& result) {
  std::ostringstream ss;
  csv::write_row(ss, {"step", "n_features", "macro_f1"});
  for (const auto& s : result.trace) {
    csv::write_row(ss, {std::to_string(s.step), std::to_string(s.n_features), format_double(s.macro_f1)});
  }
  return ss.str();
}

}  // namespace neurolos::features
