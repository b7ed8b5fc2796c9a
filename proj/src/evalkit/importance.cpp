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
#include "neurolos/evalkit.hpp"

namespace neurolos::eval {

std::vector<std::size_t> ImportanceResult::ranking() const {
  std::vector<std::size_t> order(mean.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return mean[a] > mean[b]; });
  return order;
}

ImportanceResult permutation_importance(std::vector<std::string> group_names, std::size_t n_rows,
                                        double baseline, const PermutedScore& score,
                                        std::size_t n_repeats, std::uint64_t seed, int threads) {
  require(n_repeats >= 1, ErrorKind::kValidation, "n_repeats must be >= 1");
  require(n_rows >= 1, ErrorKind::kValidation, "permutation importance needs evaluation rows");
  ImportanceResult res;
  res.baseline = baseline;
  const std::size_t groups = group_names.size();
  res.names = std::move(group_names);
  res.mean.assign(groups, 0.0);
  res.std.assign(groups, 0.0);
  parallel_for(groups, threads, [&](std::size_t g) {
    std::vector<double> drops(n_repeats);
    std::vector<std::size_t> perm(n_rows);
    for (std::size_t r = 0; r < n_repeats; ++r) {
      Rng rng = make_rng(derive_seed(seed, g), r);
      std::iota(perm.begin(), perm.end(), 0);
      std::shuffle(perm.begin(), perm.end(), rng);
      drops[r] = baseline - score(g, perm);
    }
    auto s = summarize(drops);
    res.mean[g] = s.mean;
    res.std[g] = s.std;
  });
  return res;
}

ImportanceResult permutation_importance(const Classifier& model, const Dataset& eval,
                                        const std::string& metric, std::size_t n_repeats,
                                        std::uint64_t seed, int threads) {
  require(is_known_metric(metric), ErrorKind::kValidation, "unknown metric '" + metric + "'");
  require(model.fitted(), ErrorKind::kValidation, "permutation importance needs a fitted model");
  eval.validate();
  const double baseline = metric_value(compute_metrics(eval.y, model.predict(eval.x)), metric);
  std::vector<std::string> names = eval.feature_names;
  if (names.size() != eval.cols()) {
    names.clear();
    for (std::size_t j = 0; j < eval.cols(); ++j) names.push_back("f" + std::to_string(j));
  }
  auto score = [&](std::size_t col, std::span<const std::size_t> perm) {
    Matrix x = eval.x;
    for (std::size_t r = 0; r < x.rows(); ++r) x(r, col) = eval.x(perm[r], col);
    return metric_value(compute_metrics(eval.y, model.predict(x)), metric);
  };
  auto res = permutation_importance(std::move(names), eval.rows(), baseline, score, n_repeats, seed,
                                    threads);
  res.metric = metric;
  return res;
}

std::string importance_csv(const ImportanceResult& result) {
  std::ostringstream ss;
  csv::write_row(ss, {"rank", "feature", "mean_drop", "std_drop", "metric", "baseline"});
  std::size_t rank = 1;
  for (auto i : result.ranking()) {
    csv::write_row(ss, {std::to_string(rank++), result.names[i], format_double(result.mean[i]),
                        format_double(result.std[i]), result.metric, format_double(result.baseline)});
  }
  return ss.str();
}

}  // namespace neurolos::eval
