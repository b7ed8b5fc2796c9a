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
#include "neurolos/seqml.hpp"

using namespace neurolos;
using namespace neurolos::seq;

namespace {

constexpr Timestamp kHour = 3600;

mart::TestChannel numeric_test(const std::string& abbr) {
  mart::TestChannel t;
  t.abbreviation = abbr;
  t.low = 0.0;
  t.high = 100.0;
  return t;
}

// One stay, one numeric test; NaN marks an unobserved row.
mart::SeriesMart one_test_stay(const std::vector<Timestamp>& hours, const std::vector<double>& obs,
                               double outtime_hours) {
  mart::SeriesMart m;
  m.meta.name = "fixture";
  m.meta.kind = "events";
  m.meta.tests = {numeric_test("T")};
  m.values = Matrix(0, 1);
  m.in_norm = Matrix(0, 1);
  m.mask = Matrix(0, 1);
  for (std::size_t i = 0; i < hours.size(); ++i) {
    m.stay_id.push_back(7);
    m.hadm_id.push_back(70);
    m.charttime.push_back(hours[i] * kHour);
    m.remaining_los_days.push_back((outtime_hours - static_cast<double>(hours[i])) / 24.0);
    const bool seen = !std::isnan(obs[i]);
    const double v[1] = {obs[i]};
    const double n[1] = {seen ? 1.0 : std::nan("")};
    const double k[1] = {seen ? 1.0 : 0.0};
    m.values.append_row(v);
    m.in_norm.append_row(n);
    m.mask.append_row(k);
  }
  return m;
}

FilledStay stay_of_length(std::size_t n) {
  FilledStay s;
  s.stay_id = 1;
  s.channels = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    s.channels(i, 0) = static_cast<double>(i);
    s.remaining_los_days.push_back(static_cast<double>(n - i));
  }
  return s;
}

Matrix random_window(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = n01(rng);
  return m;
}

}  // namespace

TEST_CASE("fill_series interpolates linearly between observations") {
  const double nan = std::nan("");
  auto m = one_test_stay({0, 5, 10}, {10.0, nan, 20.0}, 48);
  const std::vector<double> fill = {0.0};
  auto s = fill_series(m, 0, 3, fill);
  CHECK(s.channels(1, 0) == doctest::Approx(15.0).epsilon(1e-12));
  CHECK(s.channels(1, 2) == 0.0);  // mask keeps the observation pattern
  CHECK(s.channels(2, 3) == doctest::Approx(10.0 / 24.0));
}

TEST_CASE("fill_series holds a single observation constant") {
  const double nan = std::nan("");
  auto m = one_test_stay({0, 1, 2, 3}, {nan, 42.0, nan, nan}, 48);
  const std::vector<double> fill = {0.0};
  auto s = fill_series(m, 0, 4, fill);
  for (std::size_t i = 0; i < 4; ++i) CHECK(s.channels(i, 0) == 42.0);
}

TEST_CASE("fill_series matches a hand-computed piecewise-linear oracle") {
  const double nan = std::nan("");
  // Observations (t=1, 4), (t=3, 8), (t=7, 0); queried at every hour 0..9.
  std::vector<Timestamp> hours(10);
  std::iota(hours.begin(), hours.end(), Timestamp{0});
  std::vector<double> obs(10, nan);
  obs[1] = 4.0;
  obs[3] = 8.0;
  obs[7] = 0.0;
  auto m = one_test_stay(hours, obs, 240);
  const std::vector<double> fill = {0.0};
  auto s = fill_series(m, 0, 10, fill);
  const double expected[10] = {4, 4, 6, 8, 6, 4, 2, 0, 0, 0};
  for (std::size_t i = 0; i < 10; ++i) CHECK(s.channels(i, 0) == doctest::Approx(expected[i]).epsilon(1e-12));
}

TEST_CASE("fill_series gives never-observed tests the population fill") {
  const double nan = std::nan("");
  auto m = one_test_stay({0, 1}, {nan, nan}, 48);
  const std::vector<double> fill = {3.5};
  auto s = fill_series(m, 0, 2, fill);
  CHECK(s.channels(0, 0) == 3.5);
  CHECK(s.channels(1, 1) == 1.0);
  CHECK(s.channels(1, 2) == 0.0);
  CHECK_THROWS_AS(fill_series(m, 1, 1, fill), Error);
}

TEST_CASE("window counts follow the closed form for every small case") {
  for (std::size_t len = 1; len <= 64; ++len) {
    auto stay = stay_of_length(len);
    for (std::size_t w = 1; w <= 64; ++w) {
      for (std::size_t step = 1; step <= 64; ++step) {
        WindowSet out;
        make_windows(stay, w, step, out);
        const std::size_t expected = len >= w ? (len - w) / step + 1 : 0;
        REQUIRE(out.size() == expected);
        for (std::size_t i = 0; i < out.size(); ++i) {
          REQUIRE(out.start[i] == i * step);
          REQUIRE(out.start[i] + w <= len);
        }
      }
    }
  }
}

TEST_CASE("window examples") {
  auto stay = stay_of_length(10);
  WindowSet a, b;
  make_windows(stay, 4, 1, a);
  CHECK(a.size() == 7);
  make_windows(stay, 4, 2, b);
  CHECK(b.start == std::vector<std::size_t>{0, 2, 4, 6});
  CHECK(b.x[1](0, 0) == 2.0);
  CHECK(b.x[1](3, 0) == 5.0);
}

TEST_CASE("labels never increase along a monotone stay") {
  // Hourly events over a 10-day stay; remaining LOS crosses 7 and 2 days.
  std::vector<Timestamp> hours;
  std::vector<double> obs;
  for (Timestamp h = 0; h < 240; ++h) {
    hours.push_back(h);
    obs.push_back(static_cast<double>(h % 7));
  }
  auto m = one_test_stay(hours, obs, 240);
  auto set = build_windows(m, 12, 6);
  REQUIRE(set.size() == window_count(240, 12, 6));
  std::set<int> seen;
  for (std::size_t i = 0; i + 1 < set.size(); ++i) CHECK(set.y[i + 1] <= set.y[i]);
  for (int y : set.y) seen.insert(y);
  CHECK(seen == std::set<int>{0, 1, 2});
}

TEST_CASE("split_by_stay keeps stays whole") {
  auto set = planted_windows(90, 4, 2, 1.0, 3);
  // Give several windows to each stay.
  for (std::size_t i = 0; i < set.size(); ++i) set.stay_id[i] = static_cast<std::int64_t>(i / 5);
  auto [tr, va] = split_by_stay(set, 0.3, 11);
  CHECK(tr.size() + va.size() == set.size());
  std::set<std::int64_t> a(tr.stay_id.begin(), tr.stay_id.end()), b(va.stay_id.begin(), va.stay_id.end());
  for (auto s : b) CHECK(a.count(s) == 0);
  CHECK(b.size() == 5);  // round(0.3 * 18)
}

TEST_CASE("lstm with zero weights scores the head bias") {
  LstmConfig cfg;
  cfg.hidden = 5;
  LstmModel m(3, cfg);
  for (auto& t : m.params()) std::fill(t.data.begin(), t.data.end(), 0.0);
  auto& by = m.params().back();
  by.data = {0.25, -1.0, 3.0};
  auto z = m.logits(random_window(6, 3, 1));
  CHECK(z[0] == 0.25);
  CHECK(z[1] == -1.0);
  CHECK(z[2] == 3.0);
  auto tr = m.trace(random_window(6, 3, 1));
  for (double v : tr.h.data()) CHECK(v == 0.0);
}

TEST_CASE("lstm cell state obeys the update bound for constant input") {
  LstmConfig cfg;
  cfg.hidden = 6;
  cfg.seed = 4;
  LstmModel m(2, cfg);
  Matrix x(30, 2, 0.7);
  auto tr = m.trace(x);
  for (std::size_t k = 0; k < cfg.hidden; ++k) {
    double max_cand = 0.0;
    for (std::size_t t = 0; t < x.rows(); ++t) {
      max_cand = std::max(max_cand, std::abs(tr.c_cand(t, k)));
      CHECK(std::abs(tr.c(t, k)) <= static_cast<double>(t + 1) * max_cand + 1e-12);
    }
  }
}

TEST_CASE("lstm gradient matches finite differences") {
  LstmConfig cfg;
  cfg.hidden = 4;
  cfg.seed = 9;
  LstmModel m(3, cfg);
  std::vector<Matrix> xs = {random_window(3, 3, 1), random_window(3, 3, 2)};
  CHECK(gradient_check(m, xs, {0, 2}) < 1e-4);
}

TEST_CASE("encoder attention rows are distributions") {
  EncoderConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.n_blocks = 2;
  EncoderModel m(3, cfg);
  auto att = m.attention(random_window(7, 3, 5));
  REQUIRE(att.size() == 2);
  for (const auto& block : att) {
    REQUIRE(block.size() == 2);
    for (const auto& a : block) {
      for (std::size_t r = 0; r < a.rows(); ++r) {
        auto row = a.row(r);
        CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-9);
      }
    }
  }
}

TEST_CASE("encoder without positions is invariant to time order") {
  EncoderConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.n_blocks = 2;
  cfg.positional = false;
  cfg.seed = 2;
  EncoderModel m(3, cfg);
  auto x = random_window(9, 3, 8);
  std::vector<std::size_t> perm = {4, 2, 8, 0, 1, 7, 3, 6, 5};
  auto a = m.logits(x);
  auto b = m.logits(x.select_rows(perm));
  for (int k = 0; k < kNumClasses; ++k) CHECK(std::abs(a[k] - b[k]) <= 1e-9);
}

TEST_CASE("encoder rejects heads that do not divide the model width") {
  EncoderConfig cfg;
  cfg.d_model = 10;
  cfg.n_heads = 4;
  CHECK_THROWS_AS(EncoderModel(3, cfg), Error);
  try {
    EncoderModel(3, cfg);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
  }
}

TEST_CASE("encoder gradient matches finite differences") {
  EncoderConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.n_blocks = 1;
  cfg.seed = 6;
  EncoderModel m(3, cfg);
  std::vector<Matrix> xs = {random_window(5, 3, 3), random_window(4, 3, 4)};
  CHECK(gradient_check(m, xs, {1, 2}) < 1e-4);
}

TEST_CASE("zero learning rate leaves parameters untouched") {
  auto set = planted_windows(60, 5, 2, 1.0, 1);
  auto [tr, va] = split_by_stay(set, 0.25, 1);
  for (const std::string kind : {"lstm", "encoder"}) {
    auto m = make_sequence_model(kind, 2, kind == "lstm" ? nlohmann::json{{"hidden", 4}}
                                                         : nlohmann::json{{"d_model", 4}, {"n_heads", 2}, {"n_blocks", 1}},
                                 3);
    const auto before = m->params();
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.learning_rate = 0.0;
    train_sequence_model(*m, tr, va, cfg);
    for (std::size_t t = 0; t < before.size(); ++t) CHECK(m->params()[t].data == before[t].data);
  }
}

TEST_CASE("planted signal is learned by both architectures") {
  auto set = planted_windows(900, 16, 4, 1.0, 21);
  auto [tr, va] = split_by_stay(set, 1.0 / 3.0, 21);
  TrainConfig cfg;
  cfg.epochs = 20;
  cfg.learning_rate = 1e-3;
  cfg.patience = 5;
  cfg.seed = 21;
  const std::pair<std::string, nlohmann::json> setups[] = {
      {"lstm", {{"hidden", 32}}},
      {"encoder", {{"d_model", 32}, {"n_heads", 4}, {"n_blocks", 1}}},
  };
  for (const auto& [kind, params] : setups) {
    CAPTURE(kind);
    auto m = make_sequence_model(kind, 4, params, 21);
    auto res = train_sequence_model(*m, tr, va, cfg);
    REQUIRE(!res.history.empty());
    const auto [loss, acc] = evaluate_loss(*m, va);
    CHECK(acc >= 0.9);
    auto p = m->predict_proba(va);
    for (std::size_t i = 0; i < p.rows(); ++i) {
      auto row = p.row(i);
      CHECK(std::abs(std::accumulate(row.begin(), row.end(), 0.0) - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("training is deterministic and independent of thread count") {
  auto set = planted_windows(120, 6, 3, 1.0, 5);
  auto [tr, va] = split_by_stay(set, 0.25, 5);
  auto run = [&](int threads) {
    auto m = make_sequence_model("lstm", 3, {{"hidden", 6}}, 8);
    TrainConfig cfg;
    cfg.epochs = 3;
    cfg.learning_rate = 1e-2;
    cfg.seed = 8;
    cfg.threads = threads;
    auto res = train_sequence_model(*m, tr, va, cfg);
    return std::make_pair(res.history.back().val_accuracy, m->params());
  };
  auto a = run(1), b = run(1), c = run(3);
  CHECK(a.first == b.first);
  for (std::size_t t = 0; t < a.second.size(); ++t) {
    CHECK(a.second[t].data == b.second[t].data);
    CHECK(a.second[t].data == c.second[t].data);
  }
}

TEST_CASE("sequence models round-trip through json") {
  auto set = planted_windows(30, 5, 2, 1.0, 2);
  for (const std::string kind : {"lstm", "encoder"}) {
    auto m = make_sequence_model(kind, 2, kind == "lstm" ? nlohmann::json{{"hidden", 3}}
                                                         : nlohmann::json{{"d_model", 4}, {"n_heads", 2}, {"n_blocks", 2}},
                                 5);
    m->fit_standardization(set);
    auto back = sequence_model_from_json(nlohmann::json::parse(m->to_json().dump()));
    CHECK(back->kind() == kind);
    CHECK(back->predict_proba(set) == m->predict_proba(set));
  }
  CHECK_THROWS_AS(make_sequence_model("lstm", 2, {{"layers", 2}}, 0), Error);
  CHECK_THROWS_AS(make_sequence_model("gru", 2, {}, 0), Error);
}

TEST_CASE("history csv has one row per epoch") {
  TrainResult r;
  r.history = {{1, 1.0, 0.9, 0.5}, {2, 0.8, 0.7, 0.75}};
  CHECK(history_csv(r) == "epoch,train_loss,val_loss,val_accuracy\n1,1,0.9,0.5\n2,0.8,0.7,0.75\n");
}
