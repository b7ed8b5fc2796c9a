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

#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "neurolos/classicml.hpp"
#include "neurolos/evalkit.hpp"

using namespace neurolos;
using namespace neurolos::eval;

namespace {

// Column 0 decides the class, the rest is noise.
Dataset planted(std::size_t n, std::size_t dims, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Matrix x;
  std::vector<int> y;
  std::vector<double> row(dims);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : row) v = n01(rng);
    x.append_row(row);
    y.push_back(row[0] < -0.43 ? 0 : row[0] < 0.43 ? 1 : 2);
  }
  return make_dataset(std::move(x), std::move(y));
}

}  // namespace

TEST_CASE("unused feature has zero importance and results are deterministic") {
  auto train = planted(300, 4, 1);
  auto test = planted(200, 4, 2);
  ml::TreeConfig cfg;
  cfg.max_depth = 2;
  ml::DecisionTree tree(cfg);
  tree.fit(train);
  std::set<int> used;
  for (const auto& n : tree.nodes())
    if (n.feature >= 0) used.insert(n.feature);
  auto a = permutation_importance(tree, test, "accuracy", 5, 3);
  auto b = permutation_importance(tree, test, "accuracy", 5, 3, 4);
  CHECK(a.mean == b.mean);
  CHECK(a.std == b.std);
  for (std::size_t j = 0; j < 4; ++j) {
    if (!used.count(static_cast<int>(j))) {
      CHECK(a.mean[j] == 0.0);
      CHECK(a.std[j] == 0.0);
    }
  }
  CHECK(a.ranking()[0] == 0);
  CHECK_THROWS_AS(permutation_importance(tree, test, "auc", 5, 3), Error);
  CHECK(importance_csv(a).rfind("rank,feature,mean_drop,std_drop,metric,baseline\n", 0) == 0);
}

TEST_CASE("duplicated feature never beats the original") {
  auto train = planted(300, 3, 5);
  auto test = planted(200, 3, 6);
  // Append a copy of column 0 that the model never sees in training splits:
  // the tree only splits on column 0 because it comes first on ties.
  auto dup = [](const Dataset& d) {
    Matrix x;
    for (std::size_t r = 0; r < d.rows(); ++r) {
      std::vector<double> row(d.x.row(r).begin(), d.x.row(r).end());
      row.push_back(row[0]);
      x.append_row(row);
    }
    return make_dataset(std::move(x), d.y);
  };
  ml::TreeConfig cfg;
  cfg.max_depth = 3;
  ml::DecisionTree tree(cfg);
  tree.fit(dup(train));
  auto imp = permutation_importance(tree, dup(test), "macro_f1", 5, 1);
  CHECK(imp.mean[3] <= imp.mean[0]);
  CHECK(imp.mean[3] == 0.0);
}

TEST_CASE("planted feature ranks first across seeds") {
  int first = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto train = planted(300, 5, 100 + s);
    auto test = planted(150, 5, 200 + s);
    ml::ForestConfig fc;
    fc.n_estimators = 20;
    fc.tree.max_features = ml::TreeConfig::MaxFeatures::kSqrt;
    fc.seed = s;
    ml::ForestModel m(fc);
    m.fit(train);
    auto imp = permutation_importance(m, test, "accuracy", 3, s);
    first += imp.ranking()[0] == 0;
  }
  CHECK(first >= 19);
}

TEST_CASE("search singleton, domains and reproducibility") {
  auto space = SearchSpace::from_json(nlohmann::json::parse(R"({
    "x": {"type": "int", "low": 1, "high": 50},
    "lr": {"type": "real", "low": 1e-5, "high": 0.3, "log": true},
    "w": {"type": "categorical", "choices": ["uniform", "distance"]}})"));
  auto obj = [](const nlohmann::json& p, double) { return -std::pow(p.at("x").get<double>() - 3, 2); };
  auto one = random_search(space, obj, 1, 9);
  CHECK(one.best == 0);
  CHECK(one.trials.size() == 1);

  auto a = random_search(space, obj, 60, 4);
  auto b = random_search(space, obj, 60, 4, {}, 3);
  for (std::size_t i = 0; i < a.trials.size(); ++i) {
    CHECK(space.contains(a.trials[i].params));
    CHECK(a.trials[i].params == b.trials[i].params);
    CHECK(a.best_trial().score >= a.trials[i].score);
  }
  CHECK(trial_log_csv(a, space, {}).rfind("trial_id,param_lr,param_w,param_x,score,status\n", 0) == 0);
  CHECK_THROWS_AS(SearchSpace::from_json({{"x", {{"type", "int"}, {"low", 5}, {"high", 1}}}}), Error);
  CHECK_THROWS_AS(SearchSpace::from_json({{"x", {{"type", "real"}, {"low", 0}, {"high", 1}, {"log", true}}}}),
                  Error);
}

TEST_CASE("search finds the integer optimum at the analytic rate") {
  // P(x = 3 sampled in 100 uniform draws over 50 values) = 1 - (49/50)^100.
  const double p = 1.0 - std::pow(49.0 / 50.0, 100.0);
  CHECK(p == doctest::Approx(0.8674).epsilon(1e-3));
  SearchSpace space;
  space.params = {{"x", ParamDomain::Kind::kInt, 1, 50, false, {}}};
  auto obj = [](const nlohmann::json& q, double) { return -std::pow(q.at("x").get<double>() - 3, 2); };
  int hits = 0;
  const int runs = 400;
  for (int s = 0; s < runs; ++s) hits += random_search(space, obj, 100, s).best_trial().params["x"] == 3;
  // Binomial(400, 0.867) has sd 0.017; allow four.
  CHECK(std::abs(hits / double(runs) - p) < 0.068);
}

TEST_CASE("search pruning and failures") {
  SearchSpace space;
  space.params = {{"x", ParamDomain::Kind::kReal, 0, 1, false, {}}};
  PruningConfig pr;
  pr.enabled = true;
  pr.rungs = {0.25, 0.5};
  std::vector<double> seen;
  auto obj = [&](const nlohmann::json& q, double resource) {
    double x = q.at("x").get<double>();
    if (x < 0.1) throw std::runtime_error("diverged");
    return x * resource;
  };
  auto res = random_search(space, obj, 16, 2, pr);
  std::size_t complete = 0, pruned = 0, failed = 0;
  for (const auto& t : res.trials) {
    complete += t.status == TrialStatus::kComplete;
    pruned += t.status == TrialStatus::kPruned;
    failed += t.status == TrialStatus::kFailed;
    if (t.status == TrialStatus::kFailed) CHECK(t.error == "diverged");
  }
  CHECK(complete + pruned + failed == 16);
  const std::size_t ok = 16 - failed;
  const std::size_t after1 = (ok + 1) / 2, after2 = (after1 + 1) / 2;
  CHECK(complete == after2);
  double best_x = 0;
  for (const auto& t : res.trials)
    if (t.status != TrialStatus::kFailed) best_x = std::max(best_x, t.params["x"].get<double>());
  CHECK(res.best_trial().params["x"].get<double>() == best_x);
  CHECK(trial_log_csv(res, space, pr).find("rung_1_score") != std::string::npos);

  auto always_fail = [](const nlohmann::json&, double) -> double { throw std::runtime_error("no"); };
  CHECK_THROWS_AS(random_search(space, always_fail, 3, 1), Error);
}

TEST_CASE("default spaces follow the documented ranges") {
  auto knn = default_search_space("knn");
  CHECK(knn.params.size() == 3);
  auto obl = default_search_space("boost-oblivious");
  for (const auto& p : obl.params) {
    if (p.name == "max_depth") CHECK(p.high == 10);
    if (p.name == "max_bins") CHECK((p.low == 32 && p.high == 255));
  }
  Rng rng = make_rng(1, 1);
  for (const auto& kind : ml::classic_kinds()) {
    auto space = default_search_space(kind);
    for (int i = 0; i < 20; ++i) {
      auto cfg = space.sample(rng);
      CHECK(space.contains(cfg));
      CHECK_NOTHROW(ml::make_classifier(kind, cfg, 0));
    }
  }
  CHECK_THROWS_AS(default_search_space("lstm"), Error);
}
