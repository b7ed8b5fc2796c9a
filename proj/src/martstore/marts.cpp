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
#include <cstdio>
#include <cstring>
#include <limits>
#include <map>
#include <unordered_map>

#include "neurolos/martstore.hpp"

namespace neurolos::mart {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::optional<double> try_number(const std::string& s) {
  if (s.empty()) return std::nullopt;
  try {
    return parse_double(s);
  } catch (const Error&) {
    return std::nullopt;
  }
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Stays of the selected admissions ordered by stay_id.
std::vector<const IcuStay*> selected_stays(const RawTables& raw,
                                           const std::set<std::int64_t>& hadm) {
  std::vector<const IcuStay*> out;
  for (const auto& s : raw.icustays) {
    if (hadm.count(s.hadm_id)) out.push_back(&s);
  }
  std::sort(out.begin(), out.end(),
            [](const IcuStay* a, const IcuStay* b) { return a->stay_id < b->stay_id; });
  return out;
}

// Parsed observation of one selected test.
struct Observation {
  Timestamp charttime;
  std::size_t test;
  double value;
  std::size_t order;  // input order, breaks charttime ties
};

struct EventIndex {
  std::unordered_map<std::int64_t, std::vector<Observation>> by_stay;
  std::size_t unknown_item = 0;
  std::size_t out_of_stay = 0;
  std::size_t malformed = 0;
};

EventIndex index_events(const RawTables& raw, const std::vector<const IcuStay*>& stays,
                        const std::vector<TestChannel>& tests) {
  EventIndex idx;
  std::unordered_map<std::int64_t, const IcuStay*> stay_of;
  for (const auto* s : stays) stay_of[s->stay_id] = s;
  std::unordered_map<std::int64_t, bool> known;
  for (const auto& i : raw.d_items) known[i.itemid] = true;
  std::unordered_map<std::int64_t, std::size_t> test_of;
  for (std::size_t t = 0; t < tests.size(); ++t) test_of[tests[t].itemid] = t;

  for (std::size_t k = 0; k < raw.chartevents.size(); ++k) {
    const auto& e = raw.chartevents[k];
    auto st = stay_of.find(e.stay_id);
    if (st == stay_of.end()) continue;
    if (!known.count(e.itemid)) {
      ++idx.unknown_item;
      continue;
    }
    auto tt = test_of.find(e.itemid);
    if (tt == test_of.end()) continue;
    const IcuStay& stay = *st->second;
    if (e.charttime < stay.intime || e.charttime >= stay.outtime) {
      ++idx.out_of_stay;
      continue;
    }
    const TestChannel& test = tests[tt->second];
    double value;
    if (test.kind == TestKind::kCategorical) {
      auto lv = std::lower_bound(test.levels.begin(), test.levels.end(), e.value);
      if (lv == test.levels.end() || *lv != e.value) {
        ++idx.malformed;
        continue;
      }
      value = static_cast<double>(lv - test.levels.begin());
    } else {
      auto v = try_number(e.value);
      if (!v || !std::isfinite(*v)) {
        ++idx.malformed;
        continue;
      }
      value = *v;
    }
    idx.by_stay[e.stay_id].push_back({e.charttime, tt->second, value, k});
  }
  for (auto& [id, obs] : idx.by_stay) {
    std::sort(obs.begin(), obs.end(), [](const Observation& a, const Observation& b) {
      return a.charttime != b.charttime ? a.charttime < b.charttime : a.order < b.order;
    });
  }
  return idx;
}

MartMeta series_meta(const std::string& name, const std::string& kind,
                     const std::vector<std::string>& test_list,
                     const std::vector<TestChannel>& tests, const EventIndex& idx) {
  MartMeta m;
  m.name = name;
  m.kind = kind;
  m.test_list = test_list;
  m.tests = tests;
  m.skipped_unknown_item = idx.unknown_item;
  m.skipped_out_of_stay = idx.out_of_stay;
  m.skipped_malformed = idx.malformed;
  return m;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  return a.empty() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

bool bitwise_equal(const Matrix& a, const Matrix& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && bitwise_equal(a.data(), b.data());
}

}  // namespace

bool matches_neuro_pattern(std::string_view icd_code) {
  for (std::string_view prefix : {"I61", "I63", "G41"}) {
    if (icd_code.substr(0, prefix.size()) == prefix) return true;
  }
  return false;
}

std::set<std::int64_t> filter_neuro_admissions(const std::vector<Diagnosis>& diagnoses) {
  std::set<std::int64_t> out;
  for (const auto& d : diagnoses) {
    if (d.seq_num == 1 && matches_neuro_pattern(d.icd_code)) out.insert(d.hadm_id);
  }
  return out;
}

double TestChannel::in_norm(double value) const {
  if (!low || !high) return 1.0;
  return (*low <= value && value <= *high) ? 1.0 : 0.0;
}

std::vector<TestChannel> resolve_tests(const RawTables& raw, const std::set<std::int64_t>& hadm,
                                       const std::vector<std::string>& test_list) {
  std::vector<TestChannel> tests;
  std::vector<std::string> unknown;
  for (const auto& abbr : test_list) {
    auto it = std::find_if(raw.d_items.begin(), raw.d_items.end(),
                           [&](const Item& i) { return i.abbreviation == abbr; });
    if (it == raw.d_items.end()) {
      unknown.push_back(abbr);
      continue;
    }
    TestChannel t;
    t.abbreviation = abbr;
    t.itemid = it->itemid;
    t.low = it->lownormalvalue;
    t.high = it->highnormalvalue;
    tests.push_back(std::move(t));
  }
  if (!unknown.empty()) {
    std::string names;
    for (const auto& u : unknown) names += (names.empty() ? "" : ", ") + u;
    fail(ErrorKind::kValidation, "unknown test abbreviation(s): " + names);
  }
  std::unordered_map<std::int64_t, std::size_t> test_of;
  for (std::size_t t = 0; t < tests.size(); ++t) test_of[tests[t].itemid] = t;
  std::vector<std::set<std::string>> texts(tests.size());
  std::vector<bool> categorical(tests.size(), false);
  for (const auto& e : raw.chartevents) {
    auto it = test_of.find(e.itemid);
    if (it == test_of.end() || !hadm.count(e.hadm_id) || e.value.empty()) continue;
    texts[it->second].insert(e.value);
    if (!try_number(e.value)) categorical[it->second] = true;
  }
  for (std::size_t t = 0; t < tests.size(); ++t) {
    if (!categorical[t]) continue;
    tests[t].kind = TestKind::kCategorical;
    tests[t].levels.assign(texts[t].begin(), texts[t].end());
  }
  return tests;
}

std::string admission_daytime(Timestamp admittime) {
  int h = hour_of(admittime);
  if (h < 6) return "night";
  if (h < 12) return "morning";
  if (h < 18) return "day";
  return "evening";
}

const Column& StaticMart::feature(std::string_view name) const {
  for (const auto& c : features) {
    if (c.name == name) return c;
  }
  fail(ErrorKind::kSchema, "static mart has no column '" + std::string(name) + "'");
}

StaticMart build_admissions_mart(const RawTables& raw, const std::set<std::int64_t>& selected_hadm,
                                 const std::vector<std::string>& test_list,
                                 const StaticMartOptions& options) {
  std::unordered_map<std::int64_t, const Admission*> adm;
  for (const auto& a : raw.admissions) adm[a.hadm_id] = &a;
  for (auto h : selected_hadm) {
    require(adm.count(h) > 0, ErrorKind::kValidation,
            "selected hadm_id " + std::to_string(h) + " not in admissions");
  }
  std::unordered_map<std::int64_t, const Patient*> pat;
  for (const auto& p : raw.patients) pat[p.subject_id] = &p;

  auto tests = resolve_tests(raw, selected_hadm, test_list);
  auto stays = selected_stays(raw, selected_hadm);
  auto idx = index_events(raw, stays, tests);

  StaticMart mart;
  mart.meta.name = "admissions";
  mart.meta.kind = "static";
  mart.meta.test_list = test_list;
  mart.meta.bin_edges = options.bin_edges;
  mart.meta.tests = tests;
  mart.meta.skipped_unknown_item = idx.unknown_item;
  mart.meta.skipped_out_of_stay = idx.out_of_stay;
  mart.meta.skipped_malformed = idx.malformed;

  auto cat = [](std::string name) { return Column{std::move(name), ColumnType::kCategorical, {}, {}}; };
  auto num = [](std::string name) { return Column{std::move(name), ColumnType::kNumeric, {}, {}}; };
  std::vector<Column> cols = {cat("gender"),         cat("insurance"),   cat("language"),
                              cat("marital_status"), cat("race"),        num("anchor_age"),
                              num("anchor_year"),    cat("first_careunit"),
                              cat("admission_daytime"), cat("admission_month")};
  const std::size_t n_base = cols.size();
  for (const auto& t : tests) {
    cols.push_back(t.kind == TestKind::kCategorical ? cat(t.abbreviation + "__mode_24h")
                                                    : num(t.abbreviation + "__value_mean_24h"));
    cols.push_back(num(t.abbreviation + "__in_norm_share_24h"));
  }

  const auto window = static_cast<Timestamp>(std::llround(options.aggregation_hours * 3600.0));
  for (const IcuStay* s : stays) {
    const Admission& a = *adm.at(s->hadm_id);
    auto pit = pat.find(a.subject_id);
    require(pit != pat.end(), ErrorKind::kData,
            "admission " + std::to_string(a.hadm_id) + " references unknown subject_id");
    const Patient& p = *pit->second;
    mart.hadm_id.push_back(s->hadm_id);
    mart.stay_id.push_back(s->stay_id);
    mart.label.push_back(bin_los(s->los, options.bin_edges));

    char month[4];
    std::snprintf(month, sizeof month, "%02u", month_of(a.admittime));
    cols[0].labels.push_back(p.gender);
    cols[1].labels.push_back(a.insurance);
    cols[2].labels.push_back(a.language);
    cols[3].labels.push_back(a.marital_status);
    cols[4].labels.push_back(a.race);
    cols[5].numbers.push_back(p.anchor_age);
    cols[6].numbers.push_back(p.anchor_year);
    cols[7].labels.push_back(s->first_careunit);
    cols[8].labels.push_back(admission_daytime(a.admittime));
    cols[9].labels.push_back(month);

    std::vector<double> sum(tests.size(), 0.0), norm(tests.size(), 0.0), count(tests.size(), 0.0);
    std::vector<std::map<std::size_t, std::size_t>> level_counts(tests.size());
    if (auto it = idx.by_stay.find(s->stay_id); it != idx.by_stay.end()) {
      for (const auto& o : it->second) {
        if (o.charttime > s->intime + window) break;
        const auto& t = tests[o.test];
        count[o.test] += 1.0;
        norm[o.test] += t.kind == TestKind::kCategorical ? 1.0 : t.in_norm(o.value);
        if (t.kind == TestKind::kCategorical) {
          ++level_counts[o.test][static_cast<std::size_t>(o.value)];
        } else {
          sum[o.test] += o.value;
        }
      }
    }
    for (std::size_t t = 0; t < tests.size(); ++t) {
      Column& value_col = cols[n_base + 2 * t];
      Column& share_col = cols[n_base + 2 * t + 1];
      if (tests[t].kind == TestKind::kCategorical) {
        std::string mode = "none";
        std::size_t best = 0;
        for (auto [level, c] : level_counts[t]) {
          if (c > best) {  // ascending level order, so ties keep the smallest level
            best = c;
            mode = tests[t].levels[level];
          }
        }
        value_col.labels.push_back(mode);
      } else {
        value_col.numbers.push_back(count[t] > 0 ? sum[t] / count[t] : kNaN);
      }
      share_col.numbers.push_back(count[t] > 0 ? norm[t] / count[t] : 1.0);
    }
  }

  // Median imputation fitted on the designated rows only.
  std::size_t fit_rows = 0;
  std::vector<bool> fit(mart.rows(), options.imputation_fit_stays.empty());
  if (!options.imputation_fit_stays.empty()) {
    for (std::size_t r = 0; r < mart.rows(); ++r) {
      fit[r] = options.imputation_fit_stays.count(mart.stay_id[r]) > 0;
    }
  }
  for (bool f : fit) fit_rows += f;
  mart.meta.imputation_fit_rows = fit_rows;
  for (auto& c : cols) {
    if (c.type != ColumnType::kNumeric) continue;
    std::vector<double> observed;
    bool any_missing = false;
    for (std::size_t r = 0; r < c.numbers.size(); ++r) {
      if (std::isnan(c.numbers[r])) {
        any_missing = true;
      } else if (fit[r]) {
        observed.push_back(c.numbers[r]);
      }
    }
    double med = median_of(std::move(observed));
    if (std::isnan(med)) med = 0.0;
    mart.meta.imputation_medians.emplace_back(c.name, med);
    if (!any_missing) continue;
    for (auto& v : c.numbers) {
      if (std::isnan(v)) v = med;
    }
  }
  mart.features = std::move(cols);
  return mart;
}

std::vector<std::pair<std::size_t, std::size_t>> SeriesMart::stay_ranges() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  std::size_t begin = 0;
  for (std::size_t r = 1; r <= rows(); ++r) {
    if (r == rows() || stay_id[r] != stay_id[begin]) {
      out.emplace_back(begin, r);
      begin = r;
    }
  }
  return out;
}

bool SeriesMart::operator==(const SeriesMart& o) const {
  return stay_id == o.stay_id && hadm_id == o.hadm_id && charttime == o.charttime &&
         bitwise_equal(remaining_los_days, o.remaining_los_days) &&
         bitwise_equal(values, o.values) && bitwise_equal(in_norm, o.in_norm) &&
         bitwise_equal(mask, o.mask) && meta == o.meta;
}

SeriesMart build_chartevents_original(const RawTables& raw,
                                      const std::set<std::int64_t>& selected_hadm,
                                      const std::vector<std::string>& test_list) {
  auto tests = resolve_tests(raw, selected_hadm, test_list);
  auto stays = selected_stays(raw, selected_hadm);
  auto idx = index_events(raw, stays, tests);
  SeriesMart m;
  m.meta = series_meta("chartevents_original", "events", test_list, tests, idx);
  const std::size_t nt = tests.size();
  m.values = Matrix(0, nt);
  m.in_norm = Matrix(0, nt);
  m.mask = Matrix(0, nt);
  std::vector<double> vals(nt), flags(nt), mask(nt);
  for (const IcuStay* s : stays) {
    auto it = idx.by_stay.find(s->stay_id);
    if (it == idx.by_stay.end()) continue;
    const auto& obs = it->second;
    for (std::size_t i = 0; i < obs.size();) {
      std::fill(vals.begin(), vals.end(), kNaN);
      std::fill(flags.begin(), flags.end(), kNaN);
      std::fill(mask.begin(), mask.end(), 0.0);
      Timestamp t = obs[i].charttime;
      for (; i < obs.size() && obs[i].charttime == t; ++i) {
        const auto& o = obs[i];
        vals[o.test] = o.value;
        flags[o.test] = tests[o.test].kind == TestKind::kCategorical ? 1.0 : tests[o.test].in_norm(o.value);
        mask[o.test] = 1.0;
      }
      m.stay_id.push_back(s->stay_id);
      m.hadm_id.push_back(s->hadm_id);
      m.charttime.push_back(t);
      m.remaining_los_days.push_back(static_cast<double>(s->outtime - t) / kSecondsPerDay);
      m.values.append_row(vals);
      m.in_norm.append_row(flags);
      m.mask.append_row(mask);
    }
  }
  return m;
}

SeriesMart build_chartevents_by_minute(const RawTables& raw,
                                       const std::set<std::int64_t>& selected_hadm,
                                       const std::vector<std::string>& test_list) {
  auto tests = resolve_tests(raw, selected_hadm, test_list);
  auto stays = selected_stays(raw, selected_hadm);
  auto idx = index_events(raw, stays, tests);
  SeriesMart m;
  m.meta = series_meta("chartevents_by_minute", "minutes", test_list, tests, idx);
  const std::size_t nt = tests.size();
  std::size_t total = 0;
  for (const IcuStay* s : stays) {
    total += static_cast<std::size_t>((s->outtime - s->intime + kSecondsPerMinute - 1) /
                                      kSecondsPerMinute);
  }
  m.values = Matrix(total, nt, kNaN);
  m.in_norm = Matrix(total, nt, kNaN);
  m.mask = Matrix(total, nt, 0.0);
  m.stay_id.reserve(total);
  std::size_t base = 0;
  for (const IcuStay* s : stays) {
    auto n = static_cast<std::size_t>((s->outtime - s->intime + kSecondsPerMinute - 1) /
                                      kSecondsPerMinute);
    for (std::size_t k = 0; k < n; ++k) {
      Timestamp t = s->intime + static_cast<Timestamp>(k) * kSecondsPerMinute;
      m.stay_id.push_back(s->stay_id);
      m.hadm_id.push_back(s->hadm_id);
      m.charttime.push_back(t);
      m.remaining_los_days.push_back(static_cast<double>(s->outtime - t) / kSecondsPerDay);
    }
    if (auto it = idx.by_stay.find(s->stay_id); it != idx.by_stay.end()) {
      // Sorted by time then input order, so later observations overwrite.
      for (const auto& o : it->second) {
        std::size_t minute = std::min<std::size_t>(
            n - 1, static_cast<std::size_t>((o.charttime - s->intime) / kSecondsPerMinute));
        std::size_t r = base + minute;
        m.values(r, o.test) = o.value;
        m.in_norm(r, o.test) =
            tests[o.test].kind == TestKind::kCategorical ? 1.0 : tests[o.test].in_norm(o.value);
        m.mask(r, o.test) = 1.0;
      }
    }
    base += n;
  }
  return m;
}

}  // namespace neurolos::mart
