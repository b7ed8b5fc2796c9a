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

#include <filesystem>
#include <set>
#include <unordered_set>

#include "neurolos/csv.hpp"
#include "neurolos/raw_tables.hpp"

namespace neurolos {
namespace {

std::string opt_ts(const std::optional<Timestamp>& t) {
  return t ? format_timestamp(*t) : std::string();
}
std::string opt_num(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }
std::string opt_str(const std::optional<std::string>& s) { return s.value_or(std::string()); }

std::optional<Timestamp> read_opt_ts(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_timestamp(s);
}
std::optional<double> read_opt_num(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return parse_double(s);
}
std::optional<std::string> read_opt_str(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return s;
}

std::string path_of(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / (name + ".csv")).string();
}

// Resolves the named columns of a table once, in order.
std::vector<std::size_t> columns(const csv::Table& t, std::initializer_list<const char*> names) {
  std::vector<std::size_t> idx;
  for (const char* n : names) idx.push_back(t.column(n));
  return idx;
}

}  // namespace

void write_raw_tables(const RawTables& raw, const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  require(!ec, ErrorKind::kIo, "cannot create directory '" + dir + "'");

  csv::Table t;
  t.header = {"subject_id", "hadm_id", "admittime", "dischtime", "deathtime",
              "insurance",  "language", "marital_status", "race"};
  for (const auto& a : raw.admissions) {
    t.rows.push_back({std::to_string(a.subject_id), std::to_string(a.hadm_id),
                      format_timestamp(a.admittime), format_timestamp(a.dischtime),
                      opt_ts(a.deathtime), a.insurance, a.language, a.marital_status, a.race});
  }
  csv::write_table(path_of(dir, "admissions"), t);

  t = {};
  t.header = {"subject_id", "gender", "anchor_age", "anchor_year", "anchor_year_group", "dod"};
  for (const auto& p : raw.patients) {
    t.rows.push_back({std::to_string(p.subject_id), p.gender, std::to_string(p.anchor_age),
                      std::to_string(p.anchor_year), p.anchor_year_group, opt_ts(p.dod)});
  }
  csv::write_table(path_of(dir, "patients"), t);

  t = {};
  t.header = {"stay_id", "hadm_id", "first_careunit", "last_careunit", "intime", "outtime", "los"};
  for (const auto& s : raw.icustays) {
    t.rows.push_back({std::to_string(s.stay_id), std::to_string(s.hadm_id), s.first_careunit,
                      s.last_careunit, format_timestamp(s.intime), format_timestamp(s.outtime),
                      format_double(s.los)});
  }
  csv::write_table(path_of(dir, "icustays"), t);

  t = {};
  t.header = {"hadm_id", "seq_num", "icd_code", "icd_version"};
  for (const auto& d : raw.diagnoses_icd) {
    t.rows.push_back({std::to_string(d.hadm_id), std::to_string(d.seq_num), d.icd_code,
                      std::to_string(d.icd_version)});
  }
  csv::write_table(path_of(dir, "diagnoses_icd"), t);

  t = {};
  t.header = {"stay_id", "hadm_id", "charttime", "itemid", "value", "valueuom"};
  for (const auto& e : raw.chartevents) {
    t.rows.push_back({std::to_string(e.stay_id), std::to_string(e.hadm_id),
                      format_timestamp(e.charttime), std::to_string(e.itemid), e.value,
                      opt_str(e.valueuom)});
  }
  csv::write_table(path_of(dir, "chartevents"), t);

  t = {};
  t.header = {"itemid",          "label",    "abbreviation", "lownormalvalue",
              "highnormalvalue", "category", "unitname"};
  for (const auto& i : raw.d_items) {
    t.rows.push_back({std::to_string(i.itemid), i.label, i.abbreviation, opt_num(i.lownormalvalue),
                      opt_num(i.highnormalvalue), i.category, opt_str(i.unitname)});
  }
  csv::write_table(path_of(dir, "d_items"), t);
}

RawTables read_raw_tables(const std::string& dir) {
  RawTables raw;
  {
    auto t = csv::read_table(path_of(dir, "admissions"));
    auto c = columns(t, {"subject_id", "hadm_id", "admittime", "dischtime", "deathtime",
                         "insurance", "language", "marital_status", "race"});
    for (const auto& r : t.rows) {
      raw.admissions.push_back({parse_int(r[c[0]]), parse_int(r[c[1]]), parse_timestamp(r[c[2]]),
                                parse_timestamp(r[c[3]]), read_opt_ts(r[c[4]]), r[c[5]], r[c[6]],
                                r[c[7]], r[c[8]]});
    }
  }
  {
    auto t = csv::read_table(path_of(dir, "patients"));
    auto c = columns(t, {"subject_id", "gender", "anchor_age", "anchor_year", "anchor_year_group",
                         "dod"});
    for (const auto& r : t.rows) {
      raw.patients.push_back({parse_int(r[c[0]]), r[c[1]], static_cast<int>(parse_int(r[c[2]])),
                              static_cast<int>(parse_int(r[c[3]])), r[c[4]],
                              read_opt_ts(r[c[5]])});
    }
  }
  {
    auto t = csv::read_table(path_of(dir, "icustays"));
    auto c = columns(t, {"stay_id", "hadm_id", "first_careunit", "last_careunit", "intime",
                         "outtime", "los"});
    for (const auto& r : t.rows) {
      raw.icustays.push_back({parse_int(r[c[0]]), parse_int(r[c[1]]), r[c[2]], r[c[3]],
                              parse_timestamp(r[c[4]]), parse_timestamp(r[c[5]]),
                              parse_double(r[c[6]])});
    }
  }
  {
    auto t = csv::read_table(path_of(dir, "diagnoses_icd"));
    auto c = columns(t, {"hadm_id", "seq_num", "icd_code", "icd_version"});
    for (const auto& r : t.rows) {
      raw.diagnoses_icd.push_back({parse_int(r[c[0]]), static_cast<int>(parse_int(r[c[1]])),
                                   r[c[2]], static_cast<int>(parse_int(r[c[3]]))});
    }
  }
  {
    auto t = csv::read_table(path_of(dir, "chartevents"));
    auto c = columns(t, {"stay_id", "hadm_id", "charttime", "itemid", "value", "valueuom"});
    raw.chartevents.reserve(t.rows.size());
    for (const auto& r : t.rows) {
      raw.chartevents.push_back({parse_int(r[c[0]]), parse_int(r[c[1]]), parse_timestamp(r[c[2]]),
                                 parse_int(r[c[3]]), r[c[4]], read_opt_str(r[c[5]])});
    }
  }
  {
    auto t = csv::read_table(path_of(dir, "d_items"));
    auto c = columns(t, {"itemid", "label", "abbreviation", "lownormalvalue", "highnormalvalue",
                         "category", "unitname"});
    for (const auto& r : t.rows) {
      raw.d_items.push_back({parse_int(r[c[0]]), r[c[1]], r[c[2]], read_opt_num(r[c[3]]),
                             read_opt_num(r[c[4]]), r[c[5]], read_opt_str(r[c[6]])});
    }
  }
  return raw;
}

void validate_raw_tables(const RawTables& raw) {
  std::unordered_set<std::int64_t> subjects, hadms, stays, items;
  for (const auto& p : raw.patients) {
    require(subjects.insert(p.subject_id).second, ErrorKind::kData,
            "duplicate subject_id " + std::to_string(p.subject_id) + " in patients");
  }
  for (const auto& a : raw.admissions) {
    require(hadms.insert(a.hadm_id).second, ErrorKind::kData,
            "duplicate hadm_id " + std::to_string(a.hadm_id) + " in admissions");
    require(subjects.count(a.subject_id) > 0, ErrorKind::kData,
            "admission " + std::to_string(a.hadm_id) + " references unknown subject_id " +
                std::to_string(a.subject_id));
  }
  for (const auto& s : raw.icustays) {
    require(stays.insert(s.stay_id).second, ErrorKind::kData,
            "duplicate stay_id " + std::to_string(s.stay_id) + " in icustays");
    require(hadms.count(s.hadm_id) > 0, ErrorKind::kData,
            "icustay " + std::to_string(s.stay_id) + " references unknown hadm_id");
    require(s.intime < s.outtime, ErrorKind::kData,
            "icustay " + std::to_string(s.stay_id) + " has intime >= outtime");
    require(s.los > 0.0, ErrorKind::kData,
            "icustay " + std::to_string(s.stay_id) + " has non-positive los");
  }
  for (const auto& d : raw.diagnoses_icd) {
    require(hadms.count(d.hadm_id) > 0, ErrorKind::kData,
            "diagnosis references unknown hadm_id " + std::to_string(d.hadm_id));
  }
  for (const auto& i : raw.d_items) {
    require(items.insert(i.itemid).second, ErrorKind::kData,
            "duplicate itemid " + std::to_string(i.itemid) + " in d_items");
  }
  for (const auto& e : raw.chartevents) {
    require(hadms.count(e.hadm_id) > 0, ErrorKind::kData,
            "chartevent references unknown hadm_id " + std::to_string(e.hadm_id));
  }
}

}  // namespace neurolos
