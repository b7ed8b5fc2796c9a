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
#include <numeric>
#include <random>

#include "doctest.h"
#include "neurolos/common.hpp"
#include "neurolos/metrics.hpp"

using namespace neurolos;
using namespace neurolos::eval;

TEST_CASE("perfect prediction scores 1 everywhere") {
  std::vector<int> y{0, 1, 2, 2, 1, 0, 0};
  auto r = compute_metrics(y, y);
  CHECK(r.accuracy == 1.0);
  for (int c = 0; c < 3; ++c) {
    CHECK(r.precision[c] == 1.0);
    CHECK(r.recall[c] == 1.0);
    CHECK(r.f1[c] == 1.0);
  }
  CHECK(r.macro.f1 == 1.0);
  CHECK(r.weighted.f1 == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r.micro.f1 == 1.0);
  CHECK_FALSE(r.zero_division);
}

TEST_CASE("hand-tallied confusion matrix") {
  std::vector<int> t{0, 0, 1, 1, 2, 2};
  std::vector<int> p{0, 1, 1, 2, 2, 0};
  auto r = compute_metrics(t, p);
  CHECK(r.confusion.counts[0] == std::array<std::size_t, 3>{1, 1, 0});
  CHECK(r.confusion.counts[1] == std::array<std::size_t, 3>{0, 1, 1});
  CHECK(r.confusion.counts[2] == std::array<std::size_t, 3>{1, 0, 1});
  CHECK(r.accuracy == 0.5);
  for (int c = 0; c < 3; ++c) {
    CHECK(r.precision[c] == 0.5);
    CHECK(r.recall[c] == 0.5);
    CHECK(r.f1[c] == 0.5);
  }
  CHECK(r.macro.f1 == 0.5);
  CHECK(r.weighted.f1 == 0.5);
}

TEST_CASE("zero division reports 0 and a note") {
  std::vector<int> t{0, 0, 1};
  std::vector<int> p{0, 0, 0};
  auto r = compute_metrics(t, p);
  CHECK(r.zero_division);
  CHECK(r.precision[1] == 0.0);
  CHECK(r.precision[2] == 0.0);
  CHECK(r.recall[2] == 0.0);
  CHECK_FALSE(r.notes.empty());
  CHECK(r.precision[0] == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("input validation") {
  std::vector<int> a{0, 1}, b{0};
  CHECK_THROWS_AS(compute_metrics(a, b), Error);
  CHECK_THROWS_AS(compute_metrics(std::vector<int>{}, std::vector<int>{}), Error);
  CHECK_THROWS_AS(compute_metrics(std::vector<int>{3}, std::vector<int>{0}), Error);
  auto r = compute_metrics(a, a);
  CHECK_THROWS_AS(metric_value(r, "auc"), Error);
  // Averages always run over all three classes; absent class 2 scores 0.
  CHECK(metric_value(r, "macro_f1") == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("micro averages equal accuracy and macro-F1 is relabeling invariant") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> cls(0, 2);
  std::uniform_int_distribution<int> len(1, 60);
  std::array<int, 3> perm{0, 1, 2};
  for (int trial = 0; trial < 1000; ++trial) {
    int n = len(rng);
    std::vector<int> t(n), p(n);
    for (int i = 0; i < n; ++i) {
      t[i] = cls(rng);
      p[i] = cls(rng);
    }
    auto r = compute_metrics(t, p);
    REQUIRE(r.micro.precision == r.accuracy);
    REQUIRE(r.micro.recall == r.accuracy);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<int> t2(n), p2(n);
    for (int i = 0; i < n; ++i) {
      t2[i] = perm[t[i]];
      p2[i] = perm[p[i]];
    }
    auto r2 = compute_metrics(t2, p2);
    REQUIRE(r2.macro.f1 == doctest::Approx(r.macro.f1).epsilon(1e-12));
  }
}

TEST_CASE("weighted F1 equals macro F1 on balanced truth") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> cls(0, 2);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<int> t, p;
    for (int c = 0; c < 3; ++c) {
      for (int i = 0; i < 7; ++i) {
        t.push_back(c);
        p.push_back(cls(rng));
      }
    }
    auto r = compute_metrics(t, p);
    REQUIRE(r.weighted.f1 == doctest::Approx(r.macro.f1).epsilon(1e-12));
  }
}

TEST_CASE("report tables") {
  std::vector<int> t{0, 0, 1, 1, 2, 2};
  std::vector<int> p{0, 1, 1, 2, 2, 0};
  std::vector<NamedReport> rows{{"forest", compute_metrics(t, p)}};
  auto md = markdown_table(rows, "macro");
  CHECK(md.find("| Model | Accuracy | Precision | Recall | F1 Score |") != std::string::npos);
  CHECK(md.find("| forest |") != std::string::npos);
  CHECK_THROWS_AS(markdown_table(rows, "harmonic"), Error);
  CHECK(metrics_csv(rows).find("forest") != std::string::npos);
  CHECK(confusion_csv(rows).find("forest") != std::string::npos);
}
