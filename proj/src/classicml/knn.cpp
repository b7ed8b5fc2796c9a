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

#include "config_json.hpp"
#include "neurolos/classicml.hpp"

namespace neurolos::ml {

void KnnConfig::validate() const {
  require(k >= 1, ErrorKind::kConfig, "n_neighbors must be >= 1");
}

KnnModel::KnnModel(KnnConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void KnnModel::fit(const Dataset& train) {
  train.validate();
  require(cfg_.k <= train.rows(), ErrorKind::kValidation,
          "n_neighbors=" + std::to_string(cfg_.k) + " exceeds the " +
              std::to_string(train.rows()) + " training rows");
  x_ = train.x;
  y_ = train.y;
}

std::array<double, kNumClasses> KnnModel::votes(std::span<const double> q) const {
  const std::size_t n = y_.size();
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = x_.row(i);
    double d = 0.0;
    if (cfg_.metric == KnnConfig::Metric::kEuclidean) {
      for (std::size_t j = 0; j < row.size(); ++j) d += (row[j] - q[j]) * (row[j] - q[j]);
      d = std::sqrt(d);
    } else {
      for (std::size_t j = 0; j < row.size(); ++j) d += std::abs(row[j] - q[j]);
    }
    dist[i] = {d, i};
  }
  const auto k = static_cast<std::ptrdiff_t>(cfg_.k);
  std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

  std::array<double, kNumClasses> v{};
  if (cfg_.weighting == KnnConfig::Weighting::kUniform) {
    for (std::ptrdiff_t i = 0; i < k; ++i) v[y_[dist[i].second]] += 1.0;
    return v;
  }
  // Exact matches take the whole vote.
  if (dist[0].first == 0.0) {
    for (std::ptrdiff_t i = 0; i < k && dist[i].first == 0.0; ++i) v[y_[dist[i].second]] += 1.0;
    return v;
  }
  for (std::ptrdiff_t i = 0; i < k; ++i) v[y_[dist[i].second]] += 1.0 / dist[i].first;
  return v;
}

std::vector<int> KnnModel::predict(const Matrix& x) const {
  require(fitted(), ErrorKind::kValidation, "knn is not fitted");
  require(x.cols() == x_.cols(), ErrorKind::kValidation, "knn feature count mismatch");
  std::vector<int> out(x.rows());
  parallel_for(x.rows(), threads_, [&](std::size_t r) { out[r] = argmax(votes(x.row(r))); });
  return out;
}

Matrix KnnModel::predict_proba(const Matrix& x) const {
  require(fitted(), ErrorKind::kValidation, "knn is not fitted");
  require(x.cols() == x_.cols(), ErrorKind::kValidation, "knn feature count mismatch");
  Matrix out(x.rows(), kNumClasses);
  parallel_for(x.rows(), threads_, [&](std::size_t r) {
    auto v = votes(x.row(r));
    const double s = v[0] + v[1] + v[2];
    for (int c = 0; c < kNumClasses; ++c) out(r, c) = v[c] / s;
  });
  return out;
}

nlohmann::json KnnModel::to_json() const {
  return detail::envelope("knn", detail::to_params(cfg_),
                          {{"x", detail::matrix_to_json(x_)}, {"y", y_}});
}

std::unique_ptr<KnnModel> KnnModel::from_json(const nlohmann::json& j) {
  const auto& env = detail::check_envelope(j, "knn");
  auto m = std::make_unique<KnnModel>(detail::knn_config(env.at("config")));
  m->x_ = detail::matrix_from_json(env.at("params").at("x"));
  m->y_ = env.at("params").at("y").get<std::vector<int>>();
  return m;
}

}  // namespace neurolos::ml
