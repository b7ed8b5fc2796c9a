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
#include <limits>
#include <sstream>

#include "json.hpp"
#include "neurolos/csv.hpp"
#include "neurolos/martstore.hpp"

namespace neurolos::mart {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string cell(double v) { return std::isnan(v) ? std::string() : format_double(v); }
double read_cell(const std::string& s) { return s.empty() ? kNaN : parse_double(s); }

json tests_to_json(const std::vector<TestChannel>& tests) {
  json arr = json::array();
  for (const auto& t : tests) {
    json j = {{"abbreviation", t.abbreviation},
              {"itemid", t.itemid},
              {"kind", t.kind == TestKind::kCategorical ? "categorical" : "numeric"},
              {"low", t.low ? json(*t.low) : json(nullptr)},
              {"high", t.high ? json(*t.high) : json(nullptr)},
              {"levels", t.levels}};
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<TestChannel> tests_from_json(const json& arr) {
  std::vector<TestChannel> out;
  for (const auto& j : arr) {
    TestChannel t;
    t.abbreviation = j.at("abbreviation").get<std::string>();
    t.itemid = j.at("itemid").get<std::int64_t>();
    t.kind = j.at("kind").get<std::string>() == "categorical" ? TestKind::kCategorical
                                                               : TestKind::kNumeric;
    if (!j.at("low").is_null()) t.low = j.at("low").get<double>();
    if (!j.at("high").is_null()) t.high = j.at("high").get<double>();
    t.levels = j.at("levels").get<std::vector<std::string>>();
    out.push_back(std::move(t));
  }
  return out;
}

json meta_to_json(const MartMeta& m, const json& columns, std::size_t rows) {
  json medians = json::array();
  for (const auto& [name, v] : m.imputation_medians) medians.push_back({{"column", name}, {"median", v}});
  return {{"schema_version", m.schema_version},
          {"name", m.name},
          {"kind", m.kind},
          {"rows", rows},
          {"columns", columns},
          {"test_list", m.test_list},
          {"tests", tests_to_json(m.tests)},
          {"bin_edges", {m.bin_edges.short_upper, m.bin_edges.medium_upper}},
          {"imputation", {{"medians", medians}, {"fit_rows", m.imputation_fit_rows}}},
          {"skipped_events",
           {{"unknown_item", m.skipped_unknown_item},
            {"out_of_stay", m.skipped_out_of_stay},
            {"malformed", m.skipped_malformed}}}};
}

MartMeta meta_from_json(const json& j) {
  MartMeta m;
  m.schema_version = j.at("schema_version").get<int>();
  m.name = j.at("name").get<std::string>();
  m.kind = j.at("kind").get<std::string>();
  m.test_list = j.at("test_list").get<std::vector<std::string>>();
  m.tests = tests_from_json(j.at("tests"));
  auto edges = j.at("bin_edges").get<std::vector<double>>();
  require(edges.size() == 2, ErrorKind::kSchema, "bin_edges must hold two values");
  m.bin_edges = {edges[0], edges[1]};
  for (const auto& e : j.at("imputation").at("medians")) {
    m.imputation_medians.emplace_back(e.at("column").get<std::string>(), e.at("median").get<double>());
  }
  m.imputation_fit_rows = j.at("imputation").at("fit_rows").get<std::size_t>();
  m.skipped_unknown_item = j.at("skipped_events").at("unknown_item").get<std::size_t>();
  m.skipped_out_of_stay = j.at("skipped_events").at("out_of_stay").get<std::size_t>();
  m.skipped_malformed = j.at("skipped_events").at("malformed").get<std::size_t>();
  return m;
}

fs::path prepare_dir(const std::string& root, const std::string& name) {
  require(!name.empty(), ErrorKind::kValidation, "mart has no name");
  fs::path dir = fs::path(root) / name;
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorKind::kIo, "cannot create directory '" + dir.string() + "'");
  return dir;
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  require(out.good(), ErrorKind::kIo, "write failed for '" + path.string() + "'");
}

json read_meta(const fs::path& dir, const std::string& expected_kind) {
  fs::path path = dir / "meta.json";
  require(fs::exists(path), ErrorKind::kSchema, "missing mart metadata '" + path.string() + "'");
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot open '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(ErrorKind::kSchema, "malformed mart metadata '" + path.string() + "': " + e.what());
  }
  require(j.contains("schema_version") && j["schema_version"].is_number_integer(),
          ErrorKind::kSchema, "mart metadata '" + path.string() + "' lacks schema_version");
  int version = j["schema_version"].get<int>();
  require(version == kSchemaVersion, ErrorKind::kSchema,
          "mart schema version " + std::to_string(version) + " does not match supported version " +
              std::to_string(kSchemaVersion) + " in '" + path.string() + "'");
  require(j.value("kind", "") == expected_kind, ErrorKind::kSchema,
          "mart '" + dir.string() + "' is of kind '" + j.value("kind", "") + "', expected '" +
              expected_kind + "'");
  return j;
}

void check_header(const csv::Table& t, const std::vector<std::string>& expected,
                  const fs::path& path) {
  require(t.header == expected, ErrorKind::kSchema,
          "column layout of '" + path.string() + "' does not match its metadata");
}

std::vector<std::string> series_header(const SeriesMart& m) {
  std::vector<std::string> h = {"stay_id", "hadm_id", "charttime", "remaining_los_days"};
  for (const auto& t : m.meta.tests) {
    h.push_back(t.abbreviation + "__value");
    h.push_back(t.abbreviation + "__in_norm");
    h.push_back(t.abbreviation + "__mask");
  }
  return h;
}

std::string sql_ident(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

void save_mart(const StaticMart& mart, const std::string& root) {
  fs::path dir = prepare_dir(root, mart.meta.name);
  csv::Table t;
  t.header = {"hadm_id", "stay_id", "label"};
  json columns = json::array();
  for (const auto& c : mart.features) {
    t.header.push_back(c.name);
    columns.push_back({{"name", c.name},
                       {"type", c.type == ColumnType::kCategorical ? "categorical" : "numeric"}});
  }
  for (std::size_t r = 0; r < mart.rows(); ++r) {
    std::vector<std::string> row = {std::to_string(mart.hadm_id[r]), std::to_string(mart.stay_id[r]),
                                    std::to_string(static_cast<int>(mart.label[r]))};
    for (const auto& c : mart.features) {
      row.push_back(c.type == ColumnType::kCategorical ? c.labels[r] : cell(c.numbers[r]));
    }
    t.rows.push_back(std::move(row));
  }
  csv::write_table((dir / "data.csv").string(), t);
  write_json(dir / "meta.json", meta_to_json(mart.meta, columns, mart.rows()));
}

StaticMart load_static_mart(const std::string& root, const std::string& name) {
  fs::path dir = fs::path(root) / name;
  json j = read_meta(dir, "static");
  StaticMart mart;
  mart.meta = meta_from_json(j);
  std::vector<std::string> expected = {"hadm_id", "stay_id", "label"};
  for (const auto& c : j.at("columns")) {
    Column col;
    col.name = c.at("name").get<std::string>();
    col.type = c.at("type").get<std::string>() == "categorical" ? ColumnType::kCategorical
                                                                 : ColumnType::kNumeric;
    expected.push_back(col.name);
    mart.features.push_back(std::move(col));
  }
  auto t = csv::read_table((dir / "data.csv").string());
  check_header(t, expected, dir / "data.csv");
  for (const auto& row : t.rows) {
    mart.hadm_id.push_back(parse_int(row[0]));
    mart.stay_id.push_back(parse_int(row[1]));
    auto label = parse_int(row[2]);
    require(label >= 0 && label < kNumClasses, ErrorKind::kData, "label out of range in mart");
    mart.label.push_back(static_cast<LosClass>(label));
    for (std::size_t c = 0; c < mart.features.size(); ++c) {
      auto& col = mart.features[c];
      if (col.type == ColumnType::kCategorical) {
        col.labels.push_back(row[3 + c]);
      } else {
        col.numbers.push_back(read_cell(row[3 + c]));
      }
    }
  }
  require(t.rows.size() == j.at("rows").get<std::size_t>(), ErrorKind::kSchema,
          "row count of '" + (dir / "data.csv").string() + "' does not match its metadata");
  return mart;
}

void save_mart(const SeriesMart& mart, const std::string& root) {
  fs::path dir = prepare_dir(root, mart.meta.name);
  auto header = series_header(mart);
  json columns = header;
  std::ofstream out(dir / "data.csv", std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot open '" + (dir / "data.csv").string() + "'");
  csv::write_row(out, header);
  std::vector<std::string> row;
  for (std::size_t r = 0; r < mart.rows(); ++r) {
    row = {std::to_string(mart.stay_id[r]), std::to_string(mart.hadm_id[r]),
           format_timestamp(mart.charttime[r]), format_double(mart.remaining_los_days[r])};
    for (std::size_t t = 0; t < mart.n_tests(); ++t) {
      row.push_back(cell(mart.values(r, t)));
      row.push_back(cell(mart.in_norm(r, t)));
      row.push_back(cell(mart.mask(r, t)));
    }
    csv::write_row(out, row);
  }
  out.flush();
  require(out.good(), ErrorKind::kIo, "write failed for '" + (dir / "data.csv").string() + "'");
  write_json(dir / "meta.json", meta_to_json(mart.meta, columns, mart.rows()));
}

SeriesMart load_series_mart(const std::string& root, const std::string& name) {
  fs::path dir = fs::path(root) / name;
  json j;
  {
    // Either series kind; validate version via the generic reader.
    fs::path path = dir / "meta.json";
    require(fs::exists(path), ErrorKind::kSchema, "missing mart metadata '" + path.string() + "'");
    std::ifstream in(path, std::ios::binary);
    json probe;
    try {
      in >> probe;
    } catch (const json::exception& e) {
      fail(ErrorKind::kSchema, "malformed mart metadata '" + path.string() + "': " + e.what());
    }
    std::string kind = probe.value("kind", "");
    require(kind == "events" || kind == "minutes", ErrorKind::kSchema,
            "mart '" + dir.string() + "' is not a series mart");
    j = read_meta(dir, kind);
  }
  SeriesMart m;
  m.meta = meta_from_json(j);
  auto t = csv::read_table((dir / "data.csv").string());
  check_header(t, series_header(m), dir / "data.csv");
  const std::size_t nt = m.n_tests();
  m.values = Matrix(t.rows.size(), nt);
  m.in_norm = Matrix(t.rows.size(), nt);
  m.mask = Matrix(t.rows.size(), nt);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    m.stay_id.push_back(parse_int(row[0]));
    m.hadm_id.push_back(parse_int(row[1]));
    m.charttime.push_back(parse_timestamp(row[2]));
    m.remaining_los_days.push_back(parse_double(row[3]));
    for (std::size_t k = 0; k < nt; ++k) {
      m.values(r, k) = read_cell(row[4 + 3 * k]);
      m.in_norm(r, k) = read_cell(row[5 + 3 * k]);
      m.mask(r, k) = read_cell(row[6 + 3 * k]);
    }
  }
  require(t.rows.size() == j.at("rows").get<std::size_t>(), ErrorKind::kSchema,
          "row count of '" + (dir / "data.csv").string() + "' does not match its metadata");
  return m;
}

std::string raw_tables_ddl() {
  return R"(CREATE TABLE patients (
  subject_id BIGINT PRIMARY KEY,
  gender TEXT NOT NULL,
  anchor_age INTEGER NOT NULL,
  anchor_year INTEGER NOT NULL,
  anchor_year_group TEXT NOT NULL,
  dod TIMESTAMP
);
CREATE TABLE admissions (
  subject_id BIGINT NOT NULL REFERENCES patients (subject_id),
  hadm_id BIGINT PRIMARY KEY,
  admittime TIMESTAMP NOT NULL,
  dischtime TIMESTAMP NOT NULL,
  deathtime TIMESTAMP,
  insurance TEXT,
  language TEXT,
  marital_status TEXT,
  race TEXT
);
CREATE TABLE icustays (
  stay_id BIGINT PRIMARY KEY,
  hadm_id BIGINT NOT NULL REFERENCES admissions (hadm_id),
  first_careunit TEXT,
  last_careunit TEXT,
  intime TIMESTAMP NOT NULL,
  outtime TIMESTAMP NOT NULL,
  los DOUBLE PRECISION NOT NULL CHECK (los > 0)
);
CREATE TABLE diagnoses_icd (
  hadm_id BIGINT NOT NULL REFERENCES admissions (hadm_id),
  seq_num INTEGER NOT NULL,
  icd_code TEXT NOT NULL,
  icd_version INTEGER NOT NULL
);
CREATE TABLE d_items (
  itemid BIGINT PRIMARY KEY,
  label TEXT NOT NULL,
  abbreviation TEXT NOT NULL,
  lownormalvalue DOUBLE PRECISION,
  highnormalvalue DOUBLE PRECISION,
  category TEXT,
  unitname TEXT
);
CREATE TABLE chartevents (
  stay_id BIGINT NOT NULL REFERENCES icustays (stay_id),
  hadm_id BIGINT NOT NULL REFERENCES admissions (hadm_id),
  charttime TIMESTAMP NOT NULL,
  itemid BIGINT NOT NULL REFERENCES d_items (itemid),
  value TEXT,
  valueuom TEXT
);
)";
}

std::string mart_ddl(const StaticMart& mart) {
  std::ostringstream ss;
  ss << "CREATE TABLE " << sql_ident(mart.meta.name) << " (\n"
     << "  hadm_id BIGINT NOT NULL,\n  stay_id BIGINT PRIMARY KEY,\n  label SMALLINT NOT NULL";
  for (const auto& c : mart.features) {
    ss << ",\n  " << sql_ident(c.name)
       << (c.type == ColumnType::kCategorical ? " TEXT NOT NULL" : " DOUBLE PRECISION NOT NULL");
  }
  ss << "\n);\n";
  return ss.str();
}

std::string mart_ddl(const SeriesMart& mart) {
  std::ostringstream ss;
  ss << "CREATE TABLE " << sql_ident(mart.meta.name) << " (\n"
     << "  stay_id BIGINT NOT NULL,\n  hadm_id BIGINT NOT NULL,\n  charttime TIMESTAMP NOT NULL,\n"
     << "  remaining_los_days DOUBLE PRECISION NOT NULL";
  for (const auto& t : mart.meta.tests) {
    ss << ",\n  " << sql_ident(t.abbreviation + "__value") << " DOUBLE PRECISION"
       << ",\n  " << sql_ident(t.abbreviation + "__in_norm") << " SMALLINT"
       << ",\n  " << sql_ident(t.abbreviation + "__mask") << " SMALLINT NOT NULL";
  }
  ss << ",\n  PRIMARY KEY (stay_id, charttime)\n);\n";
  return ss.str();
}

}  // namespace neurolos::mart
