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
#include <map>
#include <numeric>
#include <random>
#include <set>

#include "doctest.h"
#include "neurolos/classicml.hpp"
#include "neurolos/metrics.hpp"
#include "scratch.hpp"

using namespace neurolos;
using namespace neurolos::ml;

namespace {

double accuracy(const std::vector<int>& a, const std::vector<int>& b) {
  double hit = 0;
  for (std::size_t i = 0; i < a.size(); ++i) hit += a[i] == b[i];
  return hit / static_cast<double>(a.size());
}

// Three overlapping Gaussian blobs; `informative` columns carry the class.
Dataset blobs(std::size_t n, std::size_t dims, std::size_t informative, double sep, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Matrix x;
  std::vector<int> y;
  std::vector<double> row(dims);
  for (std::size_t i = 0; i < n; ++i) {
    int c = static_cast<int>(i % 3);
    for (std::size_t j = 0; j < dims; ++j) row[j] = n01(rng) + (j < informative ? sep * c : 0.0);
    x.append_row(row);
    y.push_back(c);
  }
  return make_dataset(std::move(x), std::move(y));
}

double gini_of(const std::array<double, 3>& c) {
  double n = c[0] + c[1] + c[2];
  if (n == 0) return 0;
  double s = 0;
  for (double v : c) s += (v / n) * (v / n);
  return 1 - s;
}

}  // namespace

TEST_CASE("impurity values") {
  std::array<double, 3> pure{1, 0, 0}, half{0.5, 0.5, 0}, uni{1.0 / 3, 1.0 / 3, 1.0 / 3};
  CHECK(impurity(pure, Criterion::kGini) == 0.0);
  CHECK(impurity(pure, Criterion::kEntropy) == 0.0);
  CHECK(impurity(half, Criterion::kGini) == doctest::Approx(0.5));
  CHECK(impurity(half, Criterion::kEntropy) == doctest::Approx(1.0));
  CHECK(impurity(uni, Criterion::kGini) == doctest::Approx(2.0 / 3.0));
  CHECK(impurity(uni, Criterion::kEntropy) == doctest::Approx(1.584962500721156));
  // Uniform is the maximum over a sampled simplex.
  std::mt19937_64 rng(1);
  std::gamma_distribution<double> g(1.0);
  for (int i = 0; i < 500; ++i) {
    std::array<double, 3> p{g(rng), g(rng), g(rng)};
    double s = p[0] + p[1] + p[2];
    for (auto& v : p) v /= s;
    CHECK(impurity(p, Criterion::kGini) <= 2.0 / 3.0 + 1e-12);
    CHECK(impurity(p, Criterion::kEntropy) <= std::log2(3.0) + 1e-12);
  }
}

TEST_CASE("knn matches a brute-force tally on six points") {
  Matrix x;
  for (auto [a, b] : std::vector<std::pair<double, double>>{{0, 0}, {1, 0}, {0, 1}, {5, 5}, {6, 5}, {5, 7}})
    x.append_row(std::vector<double>{a, b});
  std::vector<int> y{0, 0, 1, 1, 2, 2};
  auto train = make_dataset(x, y);
  Matrix q;
  for (auto [a, b] : std::vector<std::pair<double, double>>{{0.2, 0.1}, {5.5, 5.2}, {3, 3}, {0.4, 0.9}})
    q.append_row(std::vector<double>{a, b});

  for (auto weighting : {KnnConfig::Weighting::kUniform, KnnConfig::Weighting::kDistance}) {
    KnnModel m({3, weighting, KnnConfig::Metric::kEuclidean});
    m.fit(train);
    auto pred = m.predict(q);
    for (std::size_t i = 0; i < q.rows(); ++i) {
      std::vector<std::pair<double, int>> d;
      for (std::size_t t = 0; t < 6; ++t)
        d.push_back({std::hypot(x(t, 0) - q(i, 0), x(t, 1) - q(i, 1)), static_cast<int>(t)});
      std::sort(d.begin(), d.end());
      std::array<double, 3> v{};
      for (int k = 0; k < 3; ++k)
        v[y[d[k].second]] += weighting == KnnConfig::Weighting::kUniform ? 1.0 : 1.0 / d[k].first;
      int best = 0;
      for (int c = 1; c < 3; ++c)
        if (v[c] > v[best]) best = c;
      CHECK(pred[i] == best);
    }
  }
}

TEST_CASE("knn degenerate cases") {
  auto train = blobs(30, 2, 2, 1.0, 3);
  train.y[0] = 1;  // 11 of class 1 makes it the global majority
  KnnModel all({30, KnnConfig::Weighting::kUniform, KnnConfig::Metric::kEuclidean});
  all.fit(train);
  for (int p : all.predict(train.x)) CHECK(p == 1);

  KnnModel exact({5, KnnConfig::Weighting::kDistance, KnnConfig::Metric::kManhattan});
  exact.fit(train);
  CHECK(exact.predict(train.x) == train.y);

  KnnModel one({1, KnnConfig::Weighting::kUniform, KnnConfig::Metric::kEuclidean});
  one.fit(train);
  CHECK(one.predict(train.x) == train.y);

  KnnModel big({31, KnnConfig::Weighting::kUniform, KnnConfig::Metric::kEuclidean});
  CHECK_THROWS_AS(big.fit(train), Error);
  CHECK_FALSE(one.feature_importance().has_value());

  // Uniform positive rescaling of train and queries keeps predictions.
  auto queries = blobs(20, 2, 2, 1.0, 4);
  KnnModel base({7, KnnConfig::Weighting::kUniform, KnnConfig::Metric::kEuclidean});
  base.fit(train);
  auto scaled = train;
  for (auto& v : scaled.x.data()) v *= 3.5;
  auto sq = queries.x;
  for (auto& v : sq.data()) v *= 3.5;
  KnnModel s({7, KnnConfig::Weighting::kUniform, KnnConfig::Metric::kEuclidean});
  s.fit(scaled);
  CHECK(s.predict(sq) == base.predict(queries.x));
}

TEST_CASE("tree basics") {
  Matrix x;
  std::vector<int> y;
  for (int i = 0; i < 20; ++i) {
    x.append_row(std::vector<double>{static_cast<double>(i)});
    y.push_back(i < 9 ? 0 : 2);
  }
  DecisionTree t;
  t.fit(make_dataset(x, y));
  CHECK(t.depth() == 1);
  CHECK(t.nodes()[0].threshold == 8.5);
  CHECK(t.predict(x) == y);

  DecisionTree pure;
  pure.fit(make_dataset(x, std::vector<int>(20, 1)));
  CHECK(pure.nodes().size() == 1);

  TreeConfig shallow;
  shallow.max_depth = 2;
  DecisionTree d2(shallow);
  auto ds = blobs(200, 4, 4, 0.8, 5);
  d2.fit(ds);
  CHECK(d2.depth() <= 2);
  auto imp = *d2.feature_importance();
  CHECK(std::accumulate(imp.begin(), imp.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("tree root split equals exhaustive search") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto ds = blobs(50, 4, 2, 0.7, seed);
    DecisionTree t;
    t.fit(ds);
    const auto& root = t.nodes()[0];

    double best_gain = 0;
    int best_f = -1;
    double best_thr = 0;
    std::array<double, 3> tot{};
    for (int v : ds.y) tot[v] += 1;
    for (std::size_t f = 0; f < 4; ++f) {
      std::vector<double> u;
      for (std::size_t r = 0; r < 50; ++r) u.push_back(ds.x(r, f));
      std::sort(u.begin(), u.end());
      u.erase(std::unique(u.begin(), u.end()), u.end());
      for (std::size_t i = 0; i + 1 < u.size(); ++i) {
        double thr = (u[i] + u[i + 1]) / 2;
        std::array<double, 3> l{}, r{};
        for (std::size_t row = 0; row < 50; ++row) (ds.x(row, f) <= thr ? l : r)[ds.y[row]] += 1;
        double nl = l[0] + l[1] + l[2], nr = r[0] + r[1] + r[2];
        double gain = gini_of(tot) - nl / 50 * gini_of(l) - nr / 50 * gini_of(r);
        if (gain > best_gain + 1e-12) {
          best_gain = gain;
          best_f = static_cast<int>(f);
          best_thr = thr;
        }
      }
    }
    CHECK(root.feature == best_f);
    CHECK(root.threshold == doctest::Approx(best_thr).epsilon(1e-12));
  }
}

TEST_CASE("forest reductions and vote rule") {
  auto ds = blobs(200, 5, 3, 0.8, 6);
  ForestConfig fc;
  fc.n_estimators = 1;
  fc.bootstrap = false;
  fc.tree.max_features = TreeConfig::MaxFeatures::kSqrt;
  fc.seed = 13;
  ForestModel f(fc);
  f.fit(ds);
  TreeConfig tc = fc.tree;
  tc.seed = 13;
  DecisionTree t(tc);
  t.fit(ds);
  auto q = blobs(300, 5, 3, 0.8, 7);
  CHECK(f.predict(q.x) == t.predict(q.x));

  std::array<double, 3> votes{3, 3, 2};
  CHECK(argmax(votes) == 0);

  ForestConfig many;
  many.n_estimators = 8;
  many.tree.max_features = TreeConfig::MaxFeatures::kSqrt;
  many.seed = 2;
  ForestModel m(many);
  auto small = blobs(20, 5, 3, 0.5, 8);
  m.fit(ds);
  auto pred = m.predict(small.x);
  for (std::size_t r = 0; r < small.rows(); ++r) {
    std::array<double, 3> tally{};
    for (const auto& tree : m.trees()) tally[tree.predict(small.x.select_rows(std::vector<std::size_t>{r}))[0]] += 1;
    int best = 0;
    for (int c = 1; c < 3; ++c)
      if (tally[c] > tally[best]) best = c;
    CHECK(pred[r] == best);
  }
}

TEST_CASE("forest is thread independent and ranks planted features") {
  auto ds = blobs(300, 8, 2, 1.2, 9);
  ForestConfig fc;
  fc.n_estimators = 40;
  fc.tree.max_features = TreeConfig::MaxFeatures::kSqrt;
  fc.seed = 4;
  ForestModel a(fc), b(fc);
  a.set_threads(1);
  b.set_threads(4);
  a.fit(ds);
  b.fit(ds);
  CHECK(a.predict(ds.x) == b.predict(ds.x));
  CHECK(a.to_json() == b.to_json());
  auto imp = *a.feature_importance();
  CHECK(std::accumulate(imp.begin(), imp.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-9));
  std::vector<std::size_t> order(8);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return imp[i] > imp[j]; });
  CHECK(std::set<std::size_t>{order[0], order[1]} == std::set<std::size_t>{0, 1});

  // One informative column among constant ones.
  Matrix x;
  std::vector<int> y;
  for (int i = 0; i < 90; ++i) {
    x.append_row(std::vector<double>{1.0, static_cast<double>(i % 3) + 0.01 * i, 2.0});
    y.push_back(i % 3);
  }
  ForestModel single(fc);
  single.fit(make_dataset(x, y));
  CHECK((*single.feature_importance())[1] == doctest::Approx(1.0));
}

TEST_CASE("boosting leaf weight closed form") {
  // G = 1 - 2 = -1, H = 2, lambda = 1.
  CHECK(std::abs(leaf_weight(-1.0, 2.0, 1.0, 0.0) - 1.0 / 3.0) < 1e-12);
  // Squared error: g = pred - y, h = 1; with lambda 0 the weight is the mean residual.
  std::vector<double> residual{0.5, -1.5, 2.0, 3.0};
  double G = 0;
  for (double r : residual) G -= r;
  CHECK(std::abs(leaf_weight(G, 4.0, 0.0, 0.0) - 1.0) < 1e-12);
  // L1 soft-thresholding.
  CHECK(leaf_weight(-3.0, 1.0, 1.0, 1.0) == doctest::Approx(1.0));
  CHECK(leaf_weight(0.5, 1.0, 1.0, 1.0) == 0.0);
  CHECK(std::abs(leaf_weight(2.5, 4.0, 1.5, 0.0) + 2.5 / 5.5) < 1e-12);
}

TEST_CASE("boosting with zero learning rate predicts the prior") {
  auto ds = blobs(90, 3, 3, 1.0, 10);
  ds.y[0] = 2;
  ds.y[1] = 2;  // class 2 is now the majority
  BoostConfig c;
  c.n_rounds = 5;
  c.learning_rate = 0.0;
  BoostModel m(c);
  m.fit(ds);
  for (int p : m.predict(ds.x)) CHECK(p == 2);
  auto counts = ds.class_counts();
  CHECK(m.base_score()[2] == doctest::Approx(std::log(counts[2] / 90.0)));
}

TEST_CASE("boosting training loss is non-increasing") {
  auto ds = blobs(500, 6, 3, 0.8, 11);
  for (auto growth : {Growth::kDepthwise, Growth::kOblivious}) {
    BoostConfig c;
    c.n_rounds = 50;
    c.learning_rate = 0.1;
    c.max_depth = 4;
    c.growth = growth;
    BoostModel m(c);
    m.fit(ds);
    const auto& loss = m.train_loss();
    REQUIRE(loss.size() == 50);
    for (std::size_t i = 1; i < loss.size(); ++i) CHECK(loss[i] <= loss[i - 1] + 1e-12);
    CHECK(loss.back() < loss.front());
  }
}

TEST_CASE("oblivious trees share one split per level") {
  auto ds = blobs(300, 5, 3, 0.8, 12);
  BoostConfig c;
  c.n_rounds = 10;
  c.max_depth = 4;
  c.growth = Growth::kOblivious;
  c.bagging_temperature = 0.5;
  c.random_strength = 1.0;
  c.max_bins = 32;
  BoostModel m(c);
  m.fit(ds);
  for (const auto& round : m.trees()) {
    for (const auto& t : round) {
      CHECK(t.depth() <= 4);
      std::map<std::size_t, std::pair<int, double>> level;
      for (std::size_t k = 0; k < t.nodes.size(); ++k) {
        if (t.nodes[k].feature < 0) continue;
        auto d = static_cast<std::size_t>(std::log2(static_cast<double>(k + 1)));
        auto [it, fresh] = level.emplace(d, std::make_pair(t.nodes[k].feature, t.nodes[k].threshold));
        if (!fresh) CHECK(it->second == std::make_pair(t.nodes[k].feature, t.nodes[k].threshold));
      }
    }
  }
  BoostConfig deep = c;
  deep.max_depth = 17;
  CHECK_THROWS_AS(BoostModel{deep}, Error);
}

TEST_CASE("boosting thread independence, importance and accuracy") {
  auto ds = blobs(600, 8, 2, 1.2, 13);
  BoostConfig c;
  c.n_rounds = 40;
  c.max_depth = 3;
  c.subsample = 0.8;
  c.colsample_bytree = 0.75;
  c.seed = 9;
  BoostModel a(c), b(c);
  a.set_threads(1);
  b.set_threads(3);
  a.fit(ds);
  b.fit(ds);
  CHECK(a.to_json() == b.to_json());
  auto imp = *a.feature_importance();
  std::vector<std::size_t> order(8);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto i, auto j) { return imp[i] > imp[j]; });
  CHECK(std::set<std::size_t>{order[0], order[1]} == std::set<std::size_t>{0, 1});
  auto test = blobs(300, 8, 2, 1.2, 14);
  CHECK(accuracy(a.predict(test.x), test.y) > 0.6);
  auto proba = a.predict_proba(test.x);
  for (std::size_t r = 0; r < proba.rows(); ++r)
    CHECK(proba(r, 0) + proba(r, 1) + proba(r, 2) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("svm separable, shrinking and XOR") {
  Matrix x;
  std::vector<int> y;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01(0.0, 0.3);
  for (int i = 0; i < 100; ++i) {
    int c = i % 2;
    x.append_row(std::vector<double>{(c ? 2.0 : -2.0) + n01(rng), n01(rng)});
    y.push_back(c);
  }
  auto ds = make_dataset(x, y);
  SvmModel m({1.0, 100, 1});
  m.fit(ds);
  CHECK(accuracy(m.predict(x), y) == 1.0);
  auto w = m.weights(1);
  int ok = 0;
  for (std::size_t r = 0; r < 100; ++r) {
    double s = m.bias(1) + w[0] * x(r, 0) + w[1] * x(r, 1);
    ok += (y[r] == 1 ? 1.0 : -1.0) * s >= 1.0 - 1e-9;
  }
  CHECK(ok >= 95);

  auto noisy = blobs(150, 4, 4, 0.7, 15);
  double prev = std::numeric_limits<double>::infinity();
  for (double c : {1.0, 0.1, 0.01}) {
    SvmModel s({c, 50, 2});
    s.fit(noisy);
    double norm = 0;
    for (int k = 0; k < 3; ++k)
      for (double v : s.weights(k)) norm += v * v;
    CHECK(norm < prev);
    prev = norm;
  }

  Matrix xor_x;
  std::vector<int> xor_y;
  for (int rep = 0; rep < 25; ++rep) {
    for (auto [a, b] : std::vector<std::pair<double, double>>{{1, 1}, {-1, -1}, {1, -1}, {-1, 1}}) {
      xor_x.append_row(std::vector<double>{a, b});
      xor_y.push_back(a * b > 0 ? 0 : 1);
    }
  }
  SvmModel xm({1.0, 50, 3});
  xm.fit(make_dataset(xor_x, xor_y));
  CHECK(accuracy(xm.predict(xor_x), xor_y) <= 0.75);
}

TEST_CASE("registry validation and serialization round trips") {
  CHECK_THROWS_WITH_AS(make_classifier("gbm", {}, 0), doctest::Contains("gbm"), Error);
  CHECK_THROWS_WITH_AS(make_classifier("knn", {{"k", 3}}, 0), doctest::Contains("knn.k"), Error);
  CHECK_THROWS_WITH_AS(make_classifier("svm", {{"kernel", "rbf"}}, 0), doctest::Contains("svm.kernel"), Error);
  CHECK_THROWS_WITH_AS(make_classifier("boost-depthwise", {{"learning_rate", 2.0}}, 0),
                       doctest::Contains("learning_rate"), Error);
  try {
    make_classifier("forest", {{"n_estimators", 0}}, 0);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
  }

  auto train = blobs(120, 4, 3, 1.0, 16);
  auto test = blobs(60, 4, 3, 1.0, 17);
  std::vector<std::pair<std::string, nlohmann::json>> specs{
      {"knn", {{"n_neighbors", 7}, {"weights", "distance"}}},
      {"svm", {{"C", 0.5}}},
      {"forest", {{"n_estimators", 10}, {"max_features", "sqrt"}}},
      {"boost-depthwise", {{"n_rounds", 10}, {"subsample", 0.9}, {"reg_alpha", 0.3}}},
      {"boost-oblivious", {{"n_rounds", 10}, {"max_depth", 3}, {"bagging_temperature", 1.0}}}};
  auto dir = neurolos::testing::scratch_dir("classicml_io");
  for (const auto& [kind, params] : specs) {
    auto m = make_classifier(kind, params, 5);
    m->fit(train);
    auto path = dir + "/" + kind + ".json";
    save_model(*m, path);
    auto back = load_model(path);
    CHECK(back->kind() == kind);
    CHECK(back->predict(test.x) == m->predict(test.x));
    CHECK(back->predict_proba(test.x) == m->predict_proba(test.x));
  }
  nlohmann::json bad = make_classifier("svm", {}, 0)->to_json();
  bad["version"] = 99;
  CHECK_THROWS_AS(model_from_json(bad), Error);
}
