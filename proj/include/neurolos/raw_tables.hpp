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
#include <string>
#include <vector>

#include "neurolos/common.hpp"

namespace neurolos {

struct Admission {
  std::int64_t subject_id = 0;
  std::int64_t hadm_id = 0;
  Timestamp admittime = 0;
  Timestamp dischtime = 0;
  std::optional<Timestamp> deathtime;
  std::string insurance;
  std::string language;
  std::string marital_status;
  std::string race;
  bool operator==(const Admission&) const = default;
};

struct Patient {
  std::int64_t subject_id = 0;
  std::string gender;
  int anchor_age = 0;
  int anchor_year = 0;
  std::string anchor_year_group;
  std::optional<Timestamp> dod;
  bool operator==(const Patient&) const = default;
};

struct IcuStay {
  std::int64_t stay_id = 0;
  std::int64_t hadm_id = 0;
  std::string first_careunit;
  std::string last_careunit;
  Timestamp intime = 0;
  Timestamp outtime = 0;
  double los = 0.0;  // fractional days
  bool operator==(const IcuStay&) const = default;
};

struct Diagnosis {
  std::int64_t hadm_id = 0;
  int seq_num = 0;
  std::string icd_code;
  int icd_version = 10;
  bool operator==(const Diagnosis&) const = default;
};

struct ChartEvent {
  std::int64_t stay_id = 0;
  std::int64_t hadm_id = 0;
  Timestamp charttime = 0;
  std::int64_t itemid = 0;
  std::string value;  // text or number
  std::optional<std::string> valueuom;
  bool operator==(const ChartEvent&) const = default;
};

struct Item {
  std::int64_t itemid = 0;
  std::string label;
  std::string abbreviation;
  std::optional<double> lownormalvalue;
  std::optional<double> highnormalvalue;
  std::string category;
  std::optional<std::string> unitname;
  bool operator==(const Item&) const = default;
};

// In-memory image of the six source tables.
struct RawTables {
  std::vector<Admission> admissions;
  std::vector<Patient> patients;
  std::vector<IcuStay> icustays;
  std::vector<Diagnosis> diagnoses_icd;
  std::vector<ChartEvent> chartevents;
  std::vector<Item> d_items;
  bool operator==(const RawTables&) const = default;
};

inline const std::vector<std::string>& raw_table_names() {
  static const std::vector<std::string> names = {"admissions",    "patients",    "icustays",
                                                 "diagnoses_icd", "chartevents", "d_items"};
  return names;
}

// One <table>.csv per table in `dir`. Throws kIo with the offending path.
void write_raw_tables(const RawTables& raw, const std::string& dir);
RawTables read_raw_tables(const std::string& dir);

// Key uniqueness, positive LOS, intime < outtime, referential integrity.
void validate_raw_tables(const RawTables& raw);

}  // namespace neurolos
