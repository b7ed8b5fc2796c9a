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

#include "neurolos/validation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "neurolos/featureworks.hpp"

namespace neurolos::eval {

std::vector<int> stratified_folds(std::span<const int> labels, std::size_t k_folds,
                                  std::uint64_t seed) {
  require(k_folds >= 2, ErrorKind::kValidation, "cross-validation needs k_folds >= 2");
  Rng rng = make_rng(seed, 0xf01d);
  std::vector<int> fold(labels.size(), -1);
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == c) idx.push_back(i);
    }
    if (idx.empty()) continue;
    require(idx.size() >= k_folds, ErrorKind::kValidation,
            "class " + std::string(to_string(static_cast<LosClass>(c))) + " has " +
                std::to_string(idx.size()) + " rows, fewer than " + std::to_string(k_folds) +
                " folds");
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t i = 0; i < idx.size(); ++i) fold[idx[i]] = static_cast<int>(i % k_folds);
  }
  return fold;
}

Summary summarize(std::span<const double> values) {
  Summary s;
  if (values.empty()) return s;
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - s.mean) * (v - s.mean);
  s.std = std::sqrt(var / static_cast<double>(values.size()));
  return s;
}

CvResult cross_validate(const Dataset& dataset, const ClassifierFactory& factory,
                        const CvOptions& options) {
  require(dataset.n_synthetic() == 0, ErrorKind::kValidation,
          "cross-validation input must not contain synthetic rows");
  CvResult res;
  res.fold_of_row = stratified_folds(dataset.y, options.k_folds, options.seed);
  res.folds.resize(options.k_folds);
  // Folds run in parallel; the model itself stays single-threaded.
  parallel_for(options.k_folds, options.threads, [&](std::size_t f) {
    std::vector<std::size_t> train_idx, test_idx;
    for (std::size_t i = 0; i < dataset.rows(); ++i) {
      (res.fold_of_row[i] == static_cast<int>(f) ? test_idx : train_idx).push_back(i);
    }
    Dataset train = dataset.subset(train_idx);
    if (options.smote_k > 0) {
      train = features::smote_oversample(train, options.smote_k, derive_seed(options.seed, f)).data;
    }
    Dataset test = dataset.subset(test_idx);
    auto model = factory();
    model->fit(train);
    auto pred = model->predict(test.x);
    res.folds[f] = compute_metrics(test.y, pred);
  });
  std::vector<double> acc, mf1, wf1;
  for (const auto& r : res.folds) {
    acc.push_back(r.accuracy);
    mf1.push_back(r.macro.f1);
    wf1.push_back(r.weighted.f1);
  }
  res.accuracy = summarize(acc);
  res.macro_f1 = summarize(mf1);
  res.weighted_f1 = summarize(wf1);
  return res;
}

}  // namespace neurolos::eval
