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

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "neurolos/common.hpp"
#include "neurolos/los.hpp"
#include "neurolos/raw_tables.hpp"

namespace neurolos::mart {

inline constexpr int kSchemaVersion = 1;

// Returns hadm_ids whose primary diagnosis (seq_num 1) starts with I61, I63
// or G41, i.e. the SQL patterns 'I61%', 'I63%', 'G41%'.
std::set<std::int64_t> filter_neuro_admissions(const std::vector<Diagnosis>& diagnoses);

bool matches_neuro_pattern(std::string_view icd_code);

enum class TestKind { kNumeric, kCategorical };

// A selected chart test resolved against d_items.
struct TestChannel {
  std::string abbreviation;
  std::int64_t itemid = 0;
  TestKind kind = TestKind::kNumeric;
  std::optional<double> low;
  std::optional<double> high;
  std::vector<std::string> levels;  // categorical tests only, sorted

  // 1 inside [low, high] or when either bound is unknown, 0 outside.
  double in_norm(double value) const;
  bool operator==(const TestChannel&) const = default;
};

// Resolves abbreviations against d_items; categorical tests are those with
// any non-numeric value among the selected admissions' chartevents.
std::vector<TestChannel> resolve_tests(const RawTables& raw, const std::set<std::int64_t>& hadm,
                                       const std::vector<std::string>& test_list);

enum class ColumnType { kNumeric, kCategorical };

struct Column {
  std::string name;
  ColumnType type = ColumnType::kNumeric;
  std::vector<double> numbers;      // kNumeric
  std::vector<std::string> labels;  // kCategorical
  bool operator==(const Column&) const = default;
};

struct MartMeta {
  int schema_version = kSchemaVersion;
  std::string name;
  std::string kind;  // "static", "events" or "minutes"
  std::vector<std::string> test_list;
  BinEdges bin_edges;
  std::vector<TestChannel> tests;
  std::vector<std::pair<std::string, double>> imputation_medians;
  std::size_t imputation_fit_rows = 0;
  std::size_t skipped_unknown_item = 0;
  std::size_t skipped_out_of_stay = 0;
  std::size_t skipped_malformed = 0;
  bool operator==(const MartMeta&) const = default;
};

// One row per ICU stay of a selected admission.
struct StaticMart {
  std::vector<std::int64_t> hadm_id;
  std::vector<std::int64_t> stay_id;
  std::vector<LosClass> label;
  std::vector<Column> features;
  MartMeta meta;

  std::size_t rows() const { return stay_id.size(); }
  const Column& feature(std::string_view name) const;
  bool operator==(const StaticMart&) const = default;
};

struct StaticMartOptions {
  BinEdges bin_edges;
  double aggregation_hours = 24.0;
  // Stays whose rows define the imputation medians; empty means all rows.
  std::set<std::int64_t> imputation_fit_stays;
};

std::string admission_daytime(Timestamp admittime);

StaticMart build_admissions_mart(const RawTables& raw, const std::set<std::int64_t>& selected_hadm,
                                 const std::vector<std::string>& test_list,
                                 const StaticMartOptions& options = {});

// Per-stay time series. EventMart keeps only rows with an observed test;
// MinuteMart has one row per minute of the stay.
struct SeriesMart {
  std::vector<std::int64_t> stay_id;
  std::vector<std::int64_t> hadm_id;
  std::vector<Timestamp> charttime;
  std::vector<double> remaining_los_days;
  Matrix values;   // rows x tests; NaN where unobserved, level code for categoricals
  Matrix in_norm;  // rows x tests; NaN where unobserved
  Matrix mask;     // rows x tests; 1 observed, 0 not
  MartMeta meta;

  std::size_t rows() const { return stay_id.size(); }
  std::size_t n_tests() const { return meta.tests.size(); }
  // [begin, end) row ranges of each stay in row order.
  std::vector<std::pair<std::size_t, std::size_t>> stay_ranges() const;
  bool operator==(const SeriesMart& o) const;
};

SeriesMart build_chartevents_original(const RawTables& raw,
                                      const std::set<std::int64_t>& selected_hadm,
                                      const std::vector<std::string>& test_list);

SeriesMart build_chartevents_by_minute(const RawTables& raw,
                                       const std::set<std::int64_t>& selected_hadm,
                                       const std::vector<std::string>& test_list);

// <root>/<meta.name>/data.csv + meta.json
void save_mart(const StaticMart& mart, const std::string& root);
void save_mart(const SeriesMart& mart, const std::string& root);
StaticMart load_static_mart(const std::string& root, const std::string& name);
SeriesMart load_series_mart(const std::string& root, const std::string& name);

// CREATE TABLE statements mirroring the raw tables and the given marts.
std::string raw_tables_ddl();
std::string mart_ddl(const StaticMart& mart);
std::string mart_ddl(const SeriesMart& mart);

}  // namespace neurolos::mart
