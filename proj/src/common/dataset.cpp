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

#include "neurolos/dataset.hpp"

#include <cmath>

namespace neurolos {

std::size_t Dataset::n_synthetic() const {
  std::size_t n = 0;
  for (auto s : synthetic) n += s;
  return n;
}

std::array<std::size_t, kNumClasses> Dataset::class_counts() const {
  std::array<std::size_t, kNumClasses> c{};
  for (int label : y) ++c[static_cast<std::size_t>(label)];
  return c;
}

void Dataset::validate() const {
  require(x.rows() == y.size(), ErrorKind::kData, "feature rows and labels differ in count");
  require(synthetic.size() == y.size() && row_ids.size() == y.size(), ErrorKind::kData,
          "row metadata size mismatch");
  require(feature_names.size() == x.cols(), ErrorKind::kData, "feature name count mismatch");
  for (int label : y) {
    require(label >= 0 && label < kNumClasses, ErrorKind::kData,
            "label " + std::to_string(label) + " outside {0,1,2}");
  }
  for (double v : x.data()) {
    require(std::isfinite(v), ErrorKind::kData, "dataset contains NaN or infinite values");
  }
}

Dataset Dataset::subset(std::span<const std::size_t> rows) const {
  Dataset out;
  out.x = x.select_rows(rows);
  out.feature_names = feature_names;
  for (auto r : rows) {
    out.y.push_back(y[r]);
    out.synthetic.push_back(synthetic[r]);
    out.row_ids.push_back(row_ids[r]);
  }
  return out;
}

Dataset Dataset::select_features(std::span<const std::size_t> cols) const {
  Dataset out = *this;
  out.x = x.select_cols(cols);
  out.feature_names.clear();
  for (auto c : cols) out.feature_names.push_back(feature_names[c]);
  return out;
}

Dataset make_dataset(Matrix x, std::vector<int> y, std::vector<std::string> feature_names) {
  Dataset d;
  if (feature_names.empty()) {
    for (std::size_t c = 0; c < x.cols(); ++c) feature_names.push_back("f" + std::to_string(c));
  }
  d.feature_names = std::move(feature_names);
  d.synthetic.assign(y.size(), 0);
  d.row_ids.resize(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) d.row_ids[i] = static_cast<std::int64_t>(i);
  d.x = std::move(x);
  d.y = std::move(y);
  return d;
}

int argmax(std::span<const double> scores) {
  int best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[static_cast<std::size_t>(best)]) best = static_cast<int>(k);
  }
  return best;
}

}  // namespace neurolos
