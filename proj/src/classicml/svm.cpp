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

#include "config_json.hpp"
#include "neurolos/classicml.hpp"

namespace neurolos::ml {

void SvmConfig::validate() const {
  require(c > 0.0 && std::isfinite(c), ErrorKind::kConfig, "C must be > 0");
  require(epochs >= 1, ErrorKind::kConfig, "epochs must be >= 1");
}

SvmModel::SvmModel(SvmConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void SvmModel::fit(const Dataset& train) {
  train.validate();
  require(train.rows() > 0, ErrorKind::kData, "cannot fit an SVM on zero rows");
  const std::size_t n = train.rows(), d = train.cols();
  n_features_ = d;
  w_.assign(kNumClasses * d, 0.0);
  // Pegasos on the primal: lambda/2 |w|^2 + mean hinge, lambda = 1 / (n C).
  // The bias is the weight of a constant feature and is regularised with w.
  const double lambda = 1.0 / (static_cast<double>(n) * cfg_.c);
  const std::size_t total = cfg_.epochs * n;
  parallel_for(kNumClasses, threads_, [&](std::size_t cls) {
    Rng rng = make_rng(cfg_.seed, cls);
    std::vector<double> w(d + 1, 0.0), avg(d + 1, 0.0);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::size_t t = 0, averaged = 0;
    const double radius = 1.0 / std::sqrt(lambda);
    for (std::size_t e = 0; e < cfg_.epochs; ++e) {
      std::shuffle(order.begin(), order.end(), rng);
      for (auto i : order) {
        ++t;
        const double eta = 1.0 / (lambda * static_cast<double>(t));
        const double yi = train.y[i] == static_cast<int>(cls) ? 1.0 : -1.0;
        auto xi = train.x.row(i);
        double score = w[d];
        for (std::size_t j = 0; j < d; ++j) score += w[j] * xi[j];
        const double shrink = 1.0 - 1.0 / static_cast<double>(t);
        for (auto& v : w) v *= shrink;
        if (yi * score < 1.0) {
          for (std::size_t j = 0; j < d; ++j) w[j] += eta * yi * xi[j];
          w[d] += eta * yi;
        }
        double norm = 0.0;
        for (double v : w) norm += v * v;
        norm = std::sqrt(norm);
        if (norm > radius) {
          for (auto& v : w) v *= radius / norm;
        }
        if (2 * t > total) {
          for (std::size_t j = 0; j <= d; ++j) avg[j] += w[j];
          ++averaged;
        }
      }
    }
    for (std::size_t j = 0; j < d; ++j) w_[cls * d + j] = avg[j] / static_cast<double>(averaged);
    b_[cls] = avg[d] / static_cast<double>(averaged);
  });
}

std::span<const double> SvmModel::weights(int cls) const {
  return {w_.data() + static_cast<std::size_t>(cls) * n_features_, n_features_};
}

Matrix SvmModel::decision_function(const Matrix& x) const {
  require(fitted(), ErrorKind::kValidation, "svm is not fitted");
  require(x.cols() == n_features_, ErrorKind::kValidation, "svm feature count mismatch");
  Matrix out(x.rows(), kNumClasses);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    auto xr = x.row(r);
    for (int c = 0; c < kNumClasses; ++c) {
      auto w = weights(c);
      double s = b_[c];
      for (std::size_t j = 0; j < n_features_; ++j) s += w[j] * xr[j];
      out(r, c) = s;
    }
  }
  return out;
}

std::vector<int> SvmModel::predict(const Matrix& x) const {
  auto s = decision_function(x);
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = argmax(s.row(r));
  return out;
}

Matrix SvmModel::predict_proba(const Matrix& x) const {
  auto s = decision_function(x);
  for (std::size_t r = 0; r < s.rows(); ++r) {
    auto row = s.row(r);
    const double m = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (auto& v : row) z += (v = std::exp(v - m));
    for (auto& v : row) v /= z;
  }
  return s;
}

std::optional<std::vector<double>> SvmModel::feature_importance() const {
  require(fitted(), ErrorKind::kValidation, "svm is not fitted");
  std::vector<double> imp(n_features_, 0.0);
  for (int c = 0; c < kNumClasses; ++c) {
    auto w = weights(c);
    for (std::size_t j = 0; j < n_features_; ++j) imp[j] += std::abs(w[j]);
  }
  const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
  if (total > 0.0) {
    for (auto& v : imp) v /= total;
  }
  return imp;
}

nlohmann::json SvmModel::to_json() const {
  return detail::envelope("svm", detail::to_params(cfg_),
                          {{"n_features", n_features_}, {"w", w_}, {"b", b_}});
}

std::unique_ptr<SvmModel> SvmModel::from_json(const nlohmann::json& j) {
  const auto& env = detail::check_envelope(j, "svm");
  const auto& cfg = env.at("config");
  auto m = std::make_unique<SvmModel>(detail::svm_config(cfg, cfg.value("seed", 0ULL)));
  m->n_features_ = env.at("params").at("n_features").get<std::size_t>();
  m->w_ = env.at("params").at("w").get<std::vector<double>>();
  m->b_ = env.at("params").at("b").get<std::array<double, kNumClasses>>();
  return m;
}

}  // namespace neurolos::ml
