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
#include <random>
#include <set>

#include "doctest.h"
#include "neurolos/featureworks.hpp"
#include "neurolos/validation.hpp"

using namespace neurolos;
using namespace neurolos::features;

namespace {

mart::StaticMart small_mart() {
  mart::StaticMart m;
  const std::vector<std::string> modes{"a", "b", "c", "a", "b", "c"};
  mart::Column num{"hr", mart::ColumnType::kNumeric, {1, 2, 3, 4, 5, 9}, {}};
  mart::Column flat{"flat", mart::ColumnType::kNumeric, {5, 5, 5, 5, 5, 5}, {}};
  mart::Column cat{"vent", mart::ColumnType::kCategorical, {}, modes};
  mart::Column one{"single", mart::ColumnType::kCategorical, {}, std::vector<std::string>(6, "x")};
  m.features = {num, flat, cat, one};
  for (int i = 0; i < 6; ++i) {
    m.hadm_id.push_back(100 + i);
    m.stay_id.push_back(200 + i);
    m.label.push_back(static_cast<LosClass>(i % 3));
  }
  return m;
}

Dataset gaussian_classes(const std::array<std::size_t, 3>& counts, std::size_t dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Matrix x;
  std::vector<int> y;
  std::vector<double> row(dims);
  for (int c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < counts[c]; ++i) {
      for (auto& v : row) v = n01(rng) + 2.0 * c;
      x.append_row(row);
      y.push_back(c);
    }
  }
  return make_dataset(std::move(x), std::move(y));
}

// Nearest class mean; importance is the spread of class means per feature.
class CentroidStub : public Classifier {
 public:
  explicit CentroidStub(bool with_importance) : importance_(with_importance) {}
  std::string kind() const override { return importance_ ? "centroid" : "knn"; }
  void fit(const Dataset& d) override {
    means_ = Matrix(3, d.cols());
    std::array<double, 3> n{};
    for (std::size_t r = 0; r < d.rows(); ++r) {
      n[d.y[r]] += 1;
      for (std::size_t j = 0; j < d.cols(); ++j) means_(d.y[r], j) += d.x(r, j);
    }
    for (int c = 0; c < 3; ++c)
      for (std::size_t j = 0; j < d.cols(); ++j) means_(c, j) /= std::max(1.0, n[c]);
  }
  bool fitted() const override { return !means_.empty(); }
  std::vector<int> predict(const Matrix& x) const override {
    std::vector<int> out;
    for (std::size_t r = 0; r < x.rows(); ++r) {
      std::array<double, 3> s{};
      for (int c = 0; c < 3; ++c)
        for (std::size_t j = 0; j < x.cols(); ++j) s[c] -= std::pow(x(r, j) - means_(c, j), 2);
      out.push_back(argmax(s));
    }
    return out;
  }
  Matrix predict_proba(const Matrix& x) const override { return Matrix(x.rows(), 3, 1.0 / 3); }
  std::optional<std::vector<double>> feature_importance() const override {
    if (!importance_) return std::nullopt;
    std::vector<double> imp(means_.cols());
    for (std::size_t j = 0; j < imp.size(); ++j) {
      double lo = std::min({means_(0, j), means_(1, j), means_(2, j)});
      double hi = std::max({means_(0, j), means_(1, j), means_(2, j)});
      imp[j] = hi - lo;
    }
    return imp;
  }
  nlohmann::json to_json() const override { return {}; }

 private:
  bool importance_;
  Matrix means_;
};

ClassifierFactory stub_factory(bool with_importance) {
  return [with_importance] { return std::make_unique<CentroidStub>(with_importance); };
}

}  // namespace

TEST_CASE("encoder one-hot, z-score and constant columns") {
  auto m = small_mart();
  std::vector<std::string> dropped;
  auto ds = encode_and_scale(m, &dropped);
  CHECK(dropped == std::vector<std::string>{"flat", "single"});
  CHECK(ds.feature_names == std::vector<std::string>{"hr", "vent=a", "vent=b", "vent=c"});
  double mean = 0, var = 0;
  for (std::size_t r = 0; r < ds.rows(); ++r) mean += ds.x(r, 0);
  mean /= ds.rows();
  for (std::size_t r = 0; r < ds.rows(); ++r) var += std::pow(ds.x(r, 0) - mean, 2);
  CHECK(std::abs(mean) < 1e-9);
  CHECK(std::abs(std::sqrt(var / ds.rows()) - 1.0) < 1e-9);
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    CHECK(ds.x(r, 1) + ds.x(r, 2) + ds.x(r, 3) == 1.0);
  }
  CHECK(ds.row_ids[2] == 202);
  CHECK(ds.y == std::vector<int>{0, 1, 2, 0, 1, 2});
}

TEST_CASE("encoder statistics come from training rows only") {
  auto m = small_mart();
  std::vector<std::size_t> train{0, 1, 2};
  auto enc = FeatureEncoder::fit(m, train);
  // On rows 0..2 hr is (1,2,3) with mean 2 and population sd sqrt(2/3).
  auto ds = enc.transform(m);
  CHECK(ds.x(5, 0) == doctest::Approx((9.0 - 2.0) / std::sqrt(2.0 / 3.0)).epsilon(1e-12));
  auto again = FeatureEncoder::from_json(enc.to_json()).transform(m);
  CHECK(again == ds);
  mart::StaticMart empty;
  CHECK_THROWS_AS(encode_and_scale(empty), Error);
}

TEST_CASE("stratified split counts, determinism and disjointness") {
  auto ds = gaussian_classes({100, 100, 100}, 2, 1);
  auto [train, test] = stratified_split(ds, {0.2, 9, true});
  CHECK(test.class_counts() == std::array<std::size_t, 3>{20, 20, 20});
  CHECK(train.class_counts() == std::array<std::size_t, 3>{80, 80, 80});
  auto idx1 = stratified_split_indices(ds.y, {0.2, 9, true});
  auto idx2 = stratified_split_indices(ds.y, {0.2, 9, true});
  CHECK(idx1.test == idx2.test);
  std::set<std::size_t> all(idx1.train.begin(), idx1.train.end());
  for (auto i : idx1.test) CHECK(all.insert(i).second);
  CHECK(all.size() == 300);

  auto uneven = gaussian_classes({101, 100, 99}, 1, 2);
  auto [tr2, te2] = stratified_split(uneven, {0.2, 3, true});
  for (auto c : te2.class_counts()) CHECK((c >= 19 && c <= 21));
}

TEST_CASE("split preconditions") {
  auto ds = gaussian_classes({10, 10, 1}, 1, 3);
  CHECK_THROWS_WITH_AS(stratified_split(ds, {}), doctest::Contains("long"), Error);
  auto ok = gaussian_classes({10, 10, 10}, 1, 3);
  CHECK_THROWS_AS(stratified_split(ok, {1.0, 0, true}), Error);
  auto balanced = smote_oversample(gaussian_classes({10, 6, 6}, 1, 3), 3, 1).data;
  CHECK_THROWS_AS(stratified_split(balanced, {}), Error);
}

TEST_CASE("SMOTE balances and stays on segments") {
  auto train = gaussian_classes({500, 300, 200}, 4, 5);
  auto res = smote_oversample(train, 5, 17);
  CHECK(res.data.class_counts() == std::array<std::size_t, 3>{500, 500, 500});
  CHECK(res.data.n_synthetic() == 500);
  REQUIRE(res.origins.size() == 500);
  for (std::size_t s = 0; s < res.origins.size(); ++s) {
    const auto& o = res.origins[s];
    auto row = res.data.x.row(train.rows() + s);
    REQUIRE(train.y[o.base] == train.y[o.neighbor]);
    REQUIRE(o.base != o.neighbor);
    REQUIRE((o.lambda >= 0.0 && o.lambda < 1.0));
    for (std::size_t j = 0; j < row.size(); ++j) {
      double lo = std::min(train.x(o.base, j), train.x(o.neighbor, j));
      double hi = std::max(train.x(o.base, j), train.x(o.neighbor, j));
      REQUIRE(row[j] >= lo);
      REQUIRE(row[j] <= hi);
    }
  }
  auto again = smote_oversample(train, 5, 17);
  CHECK(again.data == res.data);

  std::vector<double> a{1.0, -2.0}, b{3.0, 4.0};
  CHECK(smote_interpolate(a, b, 0.0) == a);
  CHECK_THROWS_WITH_AS(smote_oversample(gaussian_classes({20, 5, 9}, 2, 1), 5, 1),
                       doctest::Contains("smaller k"), Error);
}

TEST_CASE("stratified folds partition rows") {
  auto ds = gaussian_classes({100, 100, 100}, 1, 4);
  auto folds = eval::stratified_folds(ds.y, 5, 8);
  std::array<std::array<int, 3>, 5> tally{};
  for (std::size_t i = 0; i < folds.size(); ++i) {
    REQUIRE((folds[i] >= 0 && folds[i] < 5));
    tally[folds[i]][ds.y[i]]++;
  }
  for (auto& f : tally) CHECK(f == std::array<int, 3>{20, 20, 20});
  CHECK_THROWS_AS(eval::stratified_folds(gaussian_classes({10, 10, 3}, 1, 1).y, 5, 1), Error);
}

TEST_CASE("cross-validation is deterministic and thread independent") {
  auto ds = gaussian_classes({60, 40, 30}, 3, 6);
  auto a = eval::cross_validate(ds, stub_factory(true), {5, 3, 0, 1});
  auto b = eval::cross_validate(ds, stub_factory(true), {5, 3, 3, 4});
  auto c = eval::cross_validate(ds, stub_factory(true), {5, 3, 3, 1});
  CHECK(a.folds.size() == 5);
  CHECK(b.macro_f1.mean == c.macro_f1.mean);
  CHECK(a.accuracy.mean > 0.7);
}

TEST_CASE("RFE elimination arithmetic and preconditions") {
  auto ds = gaussian_classes({40, 40, 40}, 20, 7);
  RfeOptions opt;
  opt.step_k = 10;
  opt.min_features = 10;
  auto res = rfe_select(ds, stub_factory(true), opt);
  REQUIRE(res.trace.size() == 2);
  CHECK(res.trace[0].n_features == 20);
  CHECK(res.trace[1].n_features == 10);
  for (auto& s : res.trace) CHECK(std::isfinite(s.macro_f1));
  CHECK(rfe_trace_csv(res).rfind("step,n_features,macro_f1\n", 0) == 0);

  opt.step_k = 20;
  CHECK_THROWS_AS(rfe_select(ds, stub_factory(true), opt), Error);
  opt.step_k = 5;
  try {
    rfe_select(ds, stub_factory(false), opt);
    FAIL("expected unsupported");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kUnsupported);
  }
}

TEST_CASE("RFE keeps planted informative columns") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n01;
  Matrix x;
  std::vector<int> y;
  std::vector<double> row(20);
  for (int i = 0; i < 300; ++i) {
    int c = i % 3;
    for (std::size_t j = 0; j < 20; ++j) row[j] = n01(rng) + (j < 5 ? 1.5 * c : 0.0);
    x.append_row(row);
    y.push_back(c);
  }
  auto ds = make_dataset(std::move(x), std::move(y));
  RfeOptions opt;
  opt.step_k = 3;
  opt.min_features = 5;
  auto res = rfe_select(ds, stub_factory(true), opt);
  int kept = 0;
  for (auto c : res.selected) kept += c < 5;
  CHECK(kept >= 4);
  auto best = std::max_element(res.trace.begin(), res.trace.end(),
                               [](auto& a, auto& b) { return a.macro_f1 < b.macro_f1; });
  CHECK(res.selected.size() <= best->n_features);
}
