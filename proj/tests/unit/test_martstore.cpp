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
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "json.hpp"
#include "neurolos/martstore.hpp"
#include "neurolos/synthgen.hpp"
#include "scratch.hpp"

using namespace neurolos;
using namespace neurolos::mart;

namespace {

constexpr std::int64_t kHr = 220045;
constexpr std::int64_t kPh = 223830;
constexpr std::int64_t kVent = 223849;

// Three admissions, one stay each, starting 2150-03-01.
RawTables handcrafted() {
  RawTables raw;
  Timestamp day0 = make_timestamp(2150, 3, 1);
  raw.patients = {{1, "F", 60, 2150, "2014 - 2016", std::nullopt},
                  {2, "M", 70, 2150, "2014 - 2016", std::nullopt},
                  {3, "F", 50, 2150, "2014 - 2016", std::nullopt}};
  raw.admissions = {
      {1, 101, day0 + 5 * 3600 + 30 * 60, day0 + 10 * kSecondsPerDay, std::nullopt, "Medicare",
       "ENGLISH", "MARRIED", "WHITE"},
      {2, 102, day0 + 13 * 3600, day0 + 10 * kSecondsPerDay, std::nullopt, "Medicaid", "ENGLISH",
       "SINGLE", "ASIAN"},
      {3, 103, day0 + 20 * 3600, day0 + 10 * kSecondsPerDay, std::nullopt, "Other", "?", "WIDOWED",
       "OTHER"}};
  auto stay = [&](std::int64_t id, std::int64_t hadm, Timestamp in, std::int64_t seconds) {
    return IcuStay{id, hadm, "Neuro Stepdown", "Neuro Stepdown", in, in + seconds,
                   static_cast<double>(seconds) / kSecondsPerDay};
  };
  raw.icustays = {stay(1001, 101, day0 + 6 * 3600, 3 * kSecondsPerDay),
                  stay(1002, 102, day0 + 14 * 3600, kSecondsPerDay),
                  stay(1003, 103, day0 + 21 * 3600, 120 * 60)};
  raw.diagnoses_icd = {{101, 1, "I619", 10}, {102, 1, "I630", 10}, {103, 1, "G419", 10}};
  raw.d_items = {{kHr, "Heart Rate", "HR", 60.0, 100.0, "Routine Vital Signs", "bpm"},
                 {kPh, "PH (Arterial)", "PH (Arterial)", 7.35, 7.45, "Labs", std::nullopt},
                 {kVent, "Ventilator Mode", "Ventilator Mode", std::nullopt, std::nullopt,
                  "Respiratory", std::nullopt}};
  Timestamp in1 = raw.icustays[0].intime, in2 = raw.icustays[1].intime,
            in3 = raw.icustays[2].intime;
  raw.chartevents = {
      {1001, 101, in1 + 3600, kHr, "70", "bpm"},
      {1001, 101, in1 + 3600, kPh, "7.2", std::nullopt},
      {1001, 101, in1 + 2 * 3600, kHr, "90", "bpm"},
      {1001, 101, in1 + 2 * 3600, kVent, "CPAP/PSV", std::nullopt},
      {1001, 101, in1 + 3 * 3600, kVent, "APRV", std::nullopt},
      {1001, 101, in1 + 4 * 3600, kVent, "APRV", std::nullopt},
      {1001, 101, in1 + 30 * 3600, kHr, "200", "bpm"},
      {1002, 102, in2 + 600, kHr, "120", "bpm"},
      {1002, 102, in2 + 900, 999999, "1", std::nullopt},
      // stay 1003 only has observations after its first minute
      {1003, 103, in3 + 10 * 60 + 5, kHr, "80", "bpm"},
      {1003, 103, in3 + 10 * 60 + 50, kHr, "85", "bpm"},
  };
  return raw;
}

const std::vector<std::string> kTests = {"HR", "PH (Arterial)", "Ventilator Mode"};

}  // namespace

TEST_CASE("neuro filter applies the prefix patterns to primary diagnoses only") {
  std::vector<Diagnosis> d = {{1, 1, "I619", 10}, {2, 1, "E11", 10}, {2, 2, "I61", 10}};
  auto s = filter_neuro_admissions(d);
  CHECK(s.count(1) == 1);
  CHECK(s.count(2) == 0);

  std::vector<Diagnosis> four = {{10, 1, "I630", 10}, {11, 1, "G419", 10}, {12, 1, "I619", 10},
                                 {13, 1, "I10", 10}};
  CHECK(filter_neuro_admissions(four) == std::set<std::int64_t>{10, 11, 12});
  CHECK(filter_neuro_admissions({}).empty());
  CHECK_FALSE(matches_neuro_pattern("I6"));
  CHECK_FALSE(matches_neuro_pattern("XI61"));
}

TEST_CASE("bin_los uses half-open bins") {
  CHECK(bin_los(1.9) == LosClass::kShort);
  CHECK(bin_los(2.0) == LosClass::kMedium);
  CHECK(bin_los(6.999) == LosClass::kMedium);
  CHECK(bin_los(7.0) == LosClass::kLong);
  CHECK(bin_los(1e-9) == LosClass::kShort);
  CHECK_THROWS_AS(bin_los(0.0), Error);
  CHECK_THROWS_AS(bin_los(-1.0), Error);
  CHECK_THROWS_AS(bin_los(std::nan("")), Error);
}

TEST_CASE("bin_los is total and monotone over positive LOS") {
  std::mt19937_64 rng(5);
  std::lognormal_distribution<double> d(1.0, 1.5);
  std::vector<double> xs(5000);
  for (auto& x : xs) x = d(rng);
  std::sort(xs.begin(), xs.end());
  int prev = 0;
  for (double x : xs) {
    int c = static_cast<int>(bin_los(x));
    CHECK(c >= prev);
    prev = c;
  }
}

TEST_CASE("admissions mart aggregates the first 24 hours and imputes medians") {
  auto raw = handcrafted();
  auto selected = filter_neuro_admissions(raw.diagnoses_icd);
  auto mart = build_admissions_mart(raw, selected, kTests);
  REQUIRE(mart.rows() == 3);
  CHECK(mart.stay_id == std::vector<std::int64_t>{1001, 1002, 1003});
  CHECK(mart.label == std::vector<LosClass>{LosClass::kMedium, LosClass::kShort, LosClass::kShort});

  const auto& hr = mart.feature("HR__value_mean_24h").numbers;
  const auto& hr_norm = mart.feature("HR__in_norm_share_24h").numbers;
  CHECK(hr[0] == 80.0);  // the 30h observation is outside the window
  CHECK(hr[1] == 120.0);
  CHECK(hr[2] == 82.5);
  CHECK(hr_norm[0] == 1.0);
  CHECK(hr_norm[1] == 0.0);

  // Only stay 1001 observed pH: the others take its value as the median and
  // default their in-norm share to 1.
  const auto& ph = mart.feature("PH (Arterial)__value_mean_24h").numbers;
  const auto& ph_norm = mart.feature("PH (Arterial)__in_norm_share_24h").numbers;
  CHECK(ph == std::vector<double>{7.2, 7.2, 7.2});
  CHECK(ph_norm == std::vector<double>{0.0, 1.0, 1.0});

  const auto& vent = mart.feature("Ventilator Mode__mode_24h").labels;
  CHECK(vent == std::vector<std::string>{"APRV", "none", "none"});

  CHECK(mart.feature("admission_daytime").labels ==
        std::vector<std::string>{"night", "day", "evening"});
  CHECK(mart.feature("admission_month").labels == std::vector<std::string>{"03", "03", "03"});
  CHECK(admission_daytime(make_timestamp(2150, 1, 1, 5, 30)) == "night");
  CHECK(admission_daytime(make_timestamp(2150, 1, 1, 6, 0)) == "morning");
  CHECK(admission_daytime(make_timestamp(2150, 1, 1, 18, 0)) == "evening");
}

TEST_CASE("imputation medians come from the designated fitting stays only") {
  auto raw = handcrafted();
  // Remove all events of stay 1003 so its HR must be imputed.
  std::erase_if(raw.chartevents, [](const ChartEvent& e) { return e.stay_id == 1003; });
  auto selected = filter_neuro_admissions(raw.diagnoses_icd);

  auto all = build_admissions_mart(raw, selected, kTests);
  CHECK(all.feature("HR__value_mean_24h").numbers[2] == 100.0);  // median of {80, 120}
  CHECK(all.feature("HR__in_norm_share_24h").numbers[2] == 1.0);

  StaticMartOptions opts;
  opts.imputation_fit_stays = {1001};
  auto fitted = build_admissions_mart(raw, selected, kTests, opts);
  CHECK(fitted.feature("HR__value_mean_24h").numbers[2] == 80.0);
  CHECK(fitted.meta.imputation_fit_rows == 1);
  bool found = false;
  for (const auto& [name, v] : fitted.meta.imputation_medians) {
    if (name == "HR__value_mean_24h") {
      CHECK(v == 80.0);
      found = true;
    }
  }
  CHECK(found);
}

TEST_CASE("unknown test abbreviations are listed in the error") {
  auto raw = handcrafted();
  auto selected = filter_neuro_admissions(raw.diagnoses_icd);
  CHECK_THROWS_WITH_AS(build_admissions_mart(raw, selected, {"HR", "Foo", "Bar"}),
                       doctest::Contains("Foo, Bar"), Error);
  CHECK_THROWS_AS(build_chartevents_original(raw, selected, {"Nope"}), Error);
}

TEST_CASE("event mart groups observations by charttime and flags norms") {
  auto raw = handcrafted();
  auto selected = filter_neuro_admissions(raw.diagnoses_icd);
  auto m = build_chartevents_original(raw, selected, kTests);
  CHECK(m.meta.skipped_unknown_item == 1);
  auto ranges = m.stay_ranges();
  REQUIRE(ranges.size() == 3);
  // Stay 1001 has 5 distinct charttimes.
  CHECK(ranges[0].second - ranges[0].first == 5);
  // First row: HR and pH at the same time.
  CHECK(m.mask(0, 0) == 1.0);
  CHECK(m.mask(0, 1) == 1.0);
  CHECK(m.mask(0, 2) == 0.0);
  CHECK(m.values(0, 1) == 7.2);
  CHECK(m.in_norm(0, 1) == 0.0);
  CHECK(m.in_norm(0, 0) == 1.0);
  CHECK(std::isnan(m.values(0, 2)));
  // Null bounds count as in-norm; categorical values hold sorted level codes.
  const auto& vent = m.meta.tests[2];
  CHECK(vent.kind == TestKind::kCategorical);
  CHECK(vent.levels == std::vector<std::string>{"APRV", "CPAP/PSV"});
  CHECK(m.values(1, 2) == 1.0);
  CHECK(m.in_norm(1, 2) == 1.0);

  for (std::size_t r = 0; r < m.rows(); ++r) {
    double observed = 0;
    for (std::size_t t = 0; t < m.n_tests(); ++t) observed += m.mask(r, t);
    CHECK(observed >= 1.0);
    CHECK(m.remaining_los_days[r] >= 0.0);
  }
  for (auto [b, e] : ranges) {
    for (std::size_t r = b + 1; r < e; ++r) {
      CHECK(m.remaining_los_days[r] < m.remaining_los_days[r - 1]);
    }
  }
}

TEST_CASE("minute mart has one row per minute and keeps the last observation") {
  auto raw = handcrafted();
  auto selected = filter_neuro_admissions(raw.diagnoses_icd);
  auto m = build_chartevents_by_minute(raw, selected, kTests);
  auto ranges = m.stay_ranges();
  REQUIRE(ranges.size() == 3);
  CHECK(ranges[0].second - ranges[0].first == 3 * 1440);
  CHECK(ranges[1].second - ranges[1].first == 1440);
  auto [b, e] = ranges[2];
  CHECK(e - b == 120);
  // Both HR observations fall in minute 10; the later one (85) wins.
  CHECK(m.values(b + 10, 0) == 85.0);
  CHECK(m.mask(b + 10, 0) == 1.0);
  CHECK(m.mask(b + 9, 0) == 0.0);
  CHECK(std::isnan(m.values(b + 9, 0)));
  for (auto [sb, se] : ranges) {
    const auto& stay = *std::find_if(raw.icustays.begin(), raw.icustays.end(),
                                     [&](const IcuStay& s) { return s.stay_id == m.stay_id[sb]; });
    CHECK(std::abs(m.remaining_los_days[sb] - stay.los) <= 1.0 / 1440.0);
  }

  // Every event row maps into its stay's minute grid.
  auto ev = build_chartevents_original(raw, selected, kTests);
  for (std::size_t r = 0; r < ev.rows(); ++r) {
    const auto& stay = *std::find_if(raw.icustays.begin(), raw.icustays.end(),
                                     [&](const IcuStay& s) { return s.stay_id == ev.stay_id[r]; });
    auto minute = (ev.charttime[r] - stay.intime) / kSecondsPerMinute;
    CHECK(minute >= 0);
    CHECK(minute < (stay.outtime - stay.intime + 59) / 60);
  }
}

TEST_CASE("marts persist losslessly and reject bad metadata") {
  auto cohort = synth::generate_cohort([] {
    synth::CohortSpec s;
    s.n_patients = 40;
    s.seed = 13;
    return s;
  }());
  auto selected = filter_neuro_admissions(cohort.raw.diagnoses_icd);
  auto tests = synth::default_test_list();
  auto root = testing::scratch_dir("mart_io");

  auto st = build_admissions_mart(cohort.raw, selected, tests);
  save_mart(st, root);
  CHECK(load_static_mart(root, "admissions") == st);
  CHECK(build_admissions_mart(cohort.raw, selected, tests) == load_static_mart(root, "admissions"));

  auto ev = build_chartevents_original(cohort.raw, selected, tests);
  save_mart(ev, root);
  CHECK(load_series_mart(root, "chartevents_original") == ev);

  auto mm = build_chartevents_by_minute(cohort.raw, selected, tests);
  save_mart(mm, root);
  CHECK(load_series_mart(root, "chartevents_by_minute") == mm);

  namespace fs = std::filesystem;
  fs::remove(fs::path(root) / "admissions" / "meta.json");
  CHECK_THROWS_WITH_AS(load_static_mart(root, "admissions"), doctest::Contains("metadata"), Error);

  auto meta_path = fs::path(root) / "chartevents_original" / "meta.json";
  nlohmann::json j;
  {
    std::ifstream in(meta_path);
    in >> j;
  }
  j["schema_version"] = kSchemaVersion + 1;
  {
    std::ofstream out(meta_path);
    out << j.dump();
  }
  try {
    load_series_mart(root, "chartevents_original");
    FAIL("expected schema error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kSchema);
    CHECK(std::string(e.what()).find("schema version") != std::string::npos);
  }
}

TEST_CASE("mart row count equals qualifying ICU stays on a generated cohort") {
  synth::CohortSpec spec;
  spec.n_patients = 2000;
  spec.seed = 42;
  spec.off_target_rate = 0.1;
  auto cohort = synth::generate_cohort(spec);
  auto selected = filter_neuro_admissions(cohort.raw.diagnoses_icd);
  std::size_t qualifying = 0;
  for (const auto& s : cohort.raw.icustays) qualifying += selected.count(s.hadm_id);
  auto mart = build_admissions_mart(cohort.raw, selected, synth::default_test_list());
  CHECK(mart.rows() == qualifying);
  CHECK(qualifying < cohort.raw.icustays.size());
  for (std::size_t r = 0; r < mart.rows(); ++r) {
    for (const auto& c : mart.features) {
      if (c.type == ColumnType::kNumeric) CHECK(std::isfinite(c.numbers[r]));
    }
  }
}

TEST_CASE("DDL covers raw tables and mart columns") {
  auto ddl = raw_tables_ddl();
  for (const auto& name : raw_table_names()) {
    CHECK(ddl.find("CREATE TABLE " + name + " (") != std::string::npos);
  }
  auto raw = handcrafted();
  auto selected = filter_neuro_admissions(raw.diagnoses_icd);
  auto st = build_admissions_mart(raw, selected, kTests);
  auto sql = mart_ddl(st);
  CHECK(sql.find("CREATE TABLE \"admissions\"") != std::string::npos);
  CHECK(sql.find("\"HR__value_mean_24h\" DOUBLE PRECISION") != std::string::npos);
  auto ev_sql = mart_ddl(build_chartevents_original(raw, selected, kTests));
  CHECK(ev_sql.find("\"PH (Arterial)__in_norm\" SMALLINT") != std::string::npos);
}
