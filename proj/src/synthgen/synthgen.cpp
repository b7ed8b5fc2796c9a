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

#include "neurolos/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <tuple>
#include <unordered_map>

#include "neurolos/csv.hpp"
#include "neurolos/los.hpp"

namespace neurolos::synth {
namespace {

constexpr std::int64_t kSubjectBase = 10000000;
constexpr std::int64_t kHadmBase = 20000000;
constexpr std::int64_t kStayBase = 30000000;
constexpr double kMinLosDays = 0.05;
constexpr double kMaxLosDays = 60.0;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  std::string s = buf;
  if (s == "-0" || s == "-0.0" || s == "-0.00") s.erase(0, 1);
  return s;
}

template <typename T>
const T& pick(Rng& rng, const std::vector<T>& items) {
  std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
  return items[d(rng)];
}

// Latent-signal model shared by the generator and the Bayes distribution:
// z = rho * severity + sqrt(1 - rho^2) * eps, log(los) = mu + sigma * z.
struct LosModel {
  double rho;
  double mu;
  double sigma;
  BinEdges edges;

  std::array<double, 3> class_probabilities(double severity) const {
    double t1 = (std::log(edges.short_upper) - mu) / sigma;
    double t2 = (std::log(edges.medium_upper) - mu) / sigma;
    double resid = std::sqrt(std::max(0.0, 1.0 - rho * rho));
    if (resid == 0.0) {
      double z = rho * severity;
      if (z < t1) return {1.0, 0.0, 0.0};
      if (z < t2) return {0.0, 1.0, 0.0};
      return {0.0, 0.0, 1.0};
    }
    double u1 = (t1 - rho * severity) / resid;
    double u2 = (t2 - rho * severity) / resid;
    double p0 = normal_cdf(u1);
    double p2 = 0.5 * std::erfc(u2 / std::sqrt(2.0));
    double p1 = std::max(0.0, 1.0 - p0 - p2);
    return {p0, p1, p2};
  }
};

const std::vector<std::string>& careunits() {
  static const std::vector<std::string> v = {
      "Neuro Surgical Intensive Care Unit (Neuro SICU)", "Neuro Stepdown",
      "Medical Intensive Care Unit (MICU)", "Surgical Intensive Care Unit (SICU)",
      "Coronary Care Unit (CCU)"};
  return v;
}

const std::vector<std::string>& off_target_codes() {
  static const std::vector<std::string> v = {"I10",    "E119",   "E785", "N179",
                                             "J189",   "F17210", "Z87891", "K219"};
  return v;
}

std::string neuro_code(Rng& rng, int family) {
  static const std::vector<std::string> i61 = {"I610", "I611", "I612", "I613", "I614",
                                               "I615", "I616", "I618", "I619"};
  static const std::vector<std::string> i63 = {"I630",  "I631",  "I632", "I633", "I634",
                                               "I635",  "I636",  "I638", "I639", "I6350",
                                               "I63511"};
  static const std::vector<std::string> g41 = {"G410", "G411", "G412", "G418", "G419"};
  switch (family) {
    case 0: return pick(rng, i61);
    case 1: return pick(rng, i63);
    default: return pick(rng, g41);
  }
}

// Patient acuity at a moment: severity plus a recovery term that shrinks as
// discharge approaches. Both scale with the signal strength.
double acuity(double rho, double signal, double severity, double remaining_days) {
  return rho * severity + signal * 0.6 * (std::log1p(remaining_days) - 1.2);
}

struct PatientOutput {
  Patient patient;
  Admission admission;
  std::vector<IcuStay> stays;
  std::vector<Diagnosis> diagnoses;
  std::vector<ChartEvent> events;
  GroundTruthRow truth;
};

PatientOutput generate_patient(const CohortSpec& spec, const LosModel& model, std::size_t index) {
  PatientOutput out;
  const std::int64_t subject_id = kSubjectBase + static_cast<std::int64_t>(index) + 1;
  const std::int64_t hadm_id = kHadmBase + static_cast<std::int64_t>(index) + 1;
  Rng rng = make_rng(spec.seed, static_cast<std::uint64_t>(subject_id));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);

  static const std::vector<std::string> year_groups = {"2008 - 2010", "2011 - 2013",
                                                       "2014 - 2016", "2017 - 2019",
                                                       "2020 - 2022"};
  static const std::vector<std::string> insurances = {"Medicare", "Medicaid", "Other"};
  static const std::vector<std::string> languages = {"ENGLISH", "ENGLISH", "ENGLISH", "?"};
  static const std::vector<std::string> maritals = {"MARRIED", "SINGLE", "WIDOWED", "DIVORCED"};
  static const std::vector<std::string> races = {"WHITE", "BLACK/AFRICAN AMERICAN",
                                                 "HISPANIC/LATINO - PUERTO RICAN", "ASIAN",
                                                 "OTHER", "UNKNOWN"};

  auto& p = out.patient;
  p.subject_id = subject_id;
  p.gender = unif(rng) < 0.5 ? "F" : "M";
  p.anchor_age = std::uniform_int_distribution<int>(18, 91)(rng);
  p.anchor_year = std::uniform_int_distribution<int>(2110, 2190)(rng);
  p.anchor_year_group = pick(rng, year_groups);

  auto& a = out.admission;
  a.subject_id = subject_id;
  a.hadm_id = hadm_id;
  a.admittime = make_timestamp(p.anchor_year, 1, 1) +
                std::uniform_int_distribution<std::int64_t>(0, 364 * kSecondsPerDay - 1)(rng);
  a.insurance = pick(rng, insurances);
  a.language = pick(rng, languages);
  a.marital_status = pick(rng, maritals);
  a.race = pick(rng, races);

  const double severity = gauss(rng);
  const double resid = std::sqrt(std::max(0.0, 1.0 - model.rho * model.rho));
  out.truth.hadm_id = hadm_id;
  out.truth.severity = severity;
  out.truth.p = model.class_probabilities(severity);

  // Diagnoses.
  double u = unif(rng);
  int family = u < spec.icd_mix[0] ? 0 : (u < spec.icd_mix[0] + spec.icd_mix[1] ? 1 : 2);
  std::string primary = neuro_code(rng, family);
  bool off_target = unif(rng) < spec.off_target_rate;
  int seq = 1;
  if (off_target) {
    out.diagnoses.push_back({hadm_id, seq++, pick(rng, off_target_codes()), 10});
    out.diagnoses.push_back({hadm_id, seq++, primary, 10});
  } else {
    out.diagnoses.push_back({hadm_id, seq++, primary, 10});
  }
  int n_secondary = std::uniform_int_distribution<int>(0, 3)(rng);
  for (int k = 0; k < n_secondary; ++k) {
    out.diagnoses.push_back({hadm_id, seq++, pick(rng, off_target_codes()), 10});
  }

  // ICU stays.
  int n_stays = unif(rng) < spec.second_stay_rate ? 2 : 1;
  Timestamp cursor = a.admittime + std::uniform_int_distribution<std::int64_t>(1800, 12 * 3600)(rng);
  const double mean_los = std::exp(spec.los_mu + 0.5 * spec.los_sigma * spec.los_sigma);
  const auto& catalog = test_catalog();
  const auto& modes = ventilator_modes();
  for (int k = 0; k < n_stays; ++k) {
    IcuStay s;
    s.stay_id = kStayBase + static_cast<std::int64_t>(index) * 2 + k;
    s.hadm_id = hadm_id;
    s.first_careunit = pick(rng, careunits());
    s.last_careunit = unif(rng) < 0.85 ? s.first_careunit : pick(rng, careunits());
    double z = model.rho * severity + resid * gauss(rng);
    double los_days = std::clamp(std::exp(spec.los_mu + spec.los_sigma * z), kMinLosDays, kMaxLosDays);
    std::int64_t duration = std::max<std::int64_t>(60, std::llround(los_days * kSecondsPerDay));
    s.intime = cursor;
    s.outtime = cursor + duration;
    s.los = static_cast<double>(duration) / static_cast<double>(kSecondsPerDay);

    // Charting rounds: times uniform over the stay, every test scheduled at
    // each round and omitted with probability missingness_rate.
    std::poisson_distribution<int> rounds_dist(spec.events_per_stay_mean * s.los / mean_los);
    int n_rounds = 1 + rounds_dist(rng);
    std::vector<std::int64_t> offsets(static_cast<std::size_t>(n_rounds));
    std::uniform_int_distribution<std::int64_t> when(0, duration - 1);
    for (auto& o : offsets) o = when(rng);
    std::sort(offsets.begin(), offsets.end());
    for (std::int64_t off : offsets) {
      Timestamp t = s.intime + off;
      double remaining = static_cast<double>(s.outtime - t) / kSecondsPerDay;
      double acu = acuity(model.rho, spec.signal_strength, severity, remaining);
      for (const auto& test : catalog) {
        if (unif(rng) < spec.missingness_rate) continue;
        ChartEvent e;
        e.stay_id = s.stay_id;
        e.hadm_id = hadm_id;
        e.charttime = t;
        e.itemid = test.itemid;
        if (test.categorical) {
          double vent_score = acu + 0.5 * gauss(rng);
          std::size_t level = 0;
          if (vent_score > -0.3) {
            double frac = normal_cdf(vent_score - 0.7);
            level = 1 + std::min<std::size_t>(modes.size() - 2,
                                              static_cast<std::size_t>(frac * (modes.size() - 1)));
          }
          e.value = modes[level];
        } else {
          double v = test.center +
                     test.direction * test.half_range * (1.2 * test.gain * acu + 0.6 * gauss(rng));
          if (test.abbreviation == "Pain Level") v = std::clamp(v, 0.0, 10.0);
          if (test.abbreviation == "Goal Richmond-RAS Scale") v = std::clamp(v, -5.0, 4.0);
          e.value = fixed(v, test.decimals);
          if (!test.unit.empty()) e.valueuom = test.unit;
        }
        out.events.push_back(std::move(e));
      }
    }
    out.stays.push_back(s);
    cursor = s.outtime + std::uniform_int_distribution<std::int64_t>(kSecondsPerDay, 3 * kSecondsPerDay)(rng);
  }
  Timestamp last_out = out.stays.back().outtime;
  a.dischtime = last_out + std::uniform_int_distribution<std::int64_t>(12 * 3600, 5 * kSecondsPerDay)(rng);
  if (unif(rng) < 0.03 + 0.04 * std::max(0.0, severity)) {
    a.deathtime = a.dischtime;
    p.dod = a.dischtime - a.dischtime % kSecondsPerDay;
  }
  return out;
}

}  // namespace

const std::vector<TestDefinition>& test_catalog() {
  static const std::vector<TestDefinition> catalog = {
      {220045, "Heart Rate", "HR", "Routine Vital Signs", "bpm", 80.0, 20.0, 1.0, 1.0, 0, false},
      {220210, "Respiratory Rate", "RR", "Respiratory", "insp/min", 16.0, 4.0, 1.0, 0.8, 0, false},
      {220181, "Non Invasive Blood Pressure mean", "NBPm", "Routine Vital Signs", "mmHg", 87.5,
       17.5, 1.0, 0.6, 0, false},
      {223762, "Temperature Celsius", "Temperature C", "Routine Vital Signs", "C", 37.0, 0.5, 1.0,
       0.7, 1, false},
      {226253, "SpO2 Desat Limit", "SpO2 Desat Limit", "Alarms", "%", 88.5, 3.5, -1.0, 0.3, 0,
       false},
      {223830, "PH (Arterial)", "PH (Arterial)", "Labs", "units", 7.40, 0.05, -1.0, 0.9, 2, false},
      {220645, "Sodium (serum)", "Sodium", "Labs", "mEq/L", 140.0, 5.0, -1.0, 0.5, 0, false},
      {227442, "Potassium (serum)", "Potassium", "Labs", "mEq/L", 4.25, 0.75, 1.0, 0.4, 1, false},
      {225624, "BUN", "BUN", "Labs", "mg/dL", 13.5, 6.5, 1.0, 0.8, 0, false},
      {223791, "Pain Level", "Pain Level", "Pain/Sedation", "", 1.5, 1.5, 1.0, 0.6, 0, false},
      {223849, "Ventilator Mode", "Ventilator Mode", "Respiratory", "", 0.0, 0.0, 0.0, 1.0, 0,
       true},
      {228096, "Goal Richmond-RAS Scale", "Goal Richmond-RAS Scale", "Pain/Sedation", "", -0.5,
       0.5, -1.0, 0.7, 0, false},
  };
  return catalog;
}

const std::vector<std::string>& ventilator_modes() {
  static const std::vector<std::string> modes = {
      "Standby",   "Ambient",   "CPAP/PPS",       "CPAP/PSV",         "SIMV/PSV",
      "SIMV/PSV/AutoFlow",      "MMV/PSV/AutoFlow", "PRVC/SIMV",      "PCV+/PSV",
      "PCV+Assist", "PRVC/AC",  "APRV",           "CMV/ASSIST",       "CMV/ASSIST/AutoFlow",
      "(S) CMV"};
  return modes;
}

std::vector<std::string> default_test_list() {
  std::vector<std::string> out;
  for (const auto& t : test_catalog()) out.push_back(t.abbreviation);
  return out;
}

void CohortSpec::validate() const {
  auto check = [](bool ok, const std::string& field, const std::string& why) {
    require(ok, ErrorKind::kValidation, "CohortSpec." + field + ": " + why);
  };
  check(n_patients >= 1, "n_patients", "must be >= 1");
  check(signal_strength >= 0.0 && signal_strength <= 1.0, "signal_strength", "must lie in [0, 1]");
  check(missingness_rate >= 0.0 && missingness_rate <= 1.0, "missingness_rate",
        "must lie in [0, 1]");
  check(off_target_rate >= 0.0 && off_target_rate <= 1.0, "off_target_rate", "must lie in [0, 1]");
  check(second_stay_rate >= 0.0 && second_stay_rate <= 1.0, "second_stay_rate",
        "must lie in [0, 1]");
  check(std::isfinite(events_per_stay_mean) && events_per_stay_mean > 0.0, "events_per_stay_mean",
        "must be positive");
  double sum = 0.0;
  for (double p : icd_mix) {
    check(p >= 0.0 && p <= 1.0, "icd_mix", "proportions must lie in [0, 1]");
    sum += p;
  }
  check(std::abs(sum - 1.0) <= 1e-9, "icd_mix", "proportions must sum to 1");
  check(std::isfinite(los_mu), "los_mu", "must be finite");
  check(std::isfinite(los_sigma) && los_sigma > 0.0, "los_sigma", "must be positive");
}

std::array<double, 3> bayes_class_probabilities(double severity, const CohortSpec& spec) {
  LosModel model{std::sqrt(spec.signal_strength), spec.los_mu, spec.los_sigma, BinEdges{}};
  return model.class_probabilities(severity);
}

Cohort generate_cohort(const CohortSpec& spec) {
  spec.validate();
  LosModel model{std::sqrt(spec.signal_strength), spec.los_mu, spec.los_sigma, BinEdges{}};

  Cohort cohort;
  auto& raw = cohort.raw;
  for (std::size_t i = 0; i < spec.n_patients; ++i) {
    PatientOutput po = generate_patient(spec, model, i);
    raw.patients.push_back(std::move(po.patient));
    raw.admissions.push_back(std::move(po.admission));
    for (auto& s : po.stays) raw.icustays.push_back(std::move(s));
    for (auto& d : po.diagnoses) raw.diagnoses_icd.push_back(std::move(d));
    for (auto& e : po.events) raw.chartevents.push_back(std::move(e));
    cohort.truth.rows.push_back(po.truth);
  }
  for (const auto& t : test_catalog()) {
    Item item;
    item.itemid = t.itemid;
    item.label = t.label;
    item.abbreviation = t.abbreviation;
    item.category = t.category;
    if (!t.categorical) {
      item.lownormalvalue = t.center - t.half_range;
      item.highnormalvalue = t.center + t.half_range;
    }
    if (!t.unit.empty()) item.unitname = t.unit;
    raw.d_items.push_back(std::move(item));
  }
  // Canonical ordering.
  std::sort(raw.d_items.begin(), raw.d_items.end(),
            [](const Item& x, const Item& y) { return x.itemid < y.itemid; });
  std::stable_sort(raw.chartevents.begin(), raw.chartevents.end(),
                   [](const ChartEvent& x, const ChartEvent& y) {
                     return std::tie(x.stay_id, x.charttime, x.itemid) <
                            std::tie(y.stay_id, y.charttime, y.itemid);
                   });
  return cohort;
}

void emit_tables(const Cohort& cohort, const std::string& dir) {
  write_raw_tables(cohort.raw, dir);
  csv::Table t;
  t.header = {"hadm_id", "p_short", "p_medium", "p_long", "severity"};
  for (const auto& r : cohort.truth.rows) {
    t.rows.push_back({std::to_string(r.hadm_id), format_double(r.p[0]), format_double(r.p[1]),
                      format_double(r.p[2]), format_double(r.severity)});
  }
  csv::write_table((std::filesystem::path(dir) / "ground_truth.csv").string(), t);
}

GroundTruth read_ground_truth(const std::string& path) {
  auto t = csv::read_table(path);
  std::size_t c_h = t.column("hadm_id"), c0 = t.column("p_short"), c1 = t.column("p_medium"),
              c2 = t.column("p_long"), cs = t.column("severity");
  GroundTruth gt;
  for (const auto& r : t.rows) {
    gt.rows.push_back({parse_int(r[c_h]),
                       {parse_double(r[c0]), parse_double(r[c1]), parse_double(r[c2])},
                       parse_double(r[cs])});
  }
  return gt;
}

double bayes_accuracy(const Cohort& cohort) {
  std::unordered_map<std::int64_t, int> argmax;
  for (const auto& r : cohort.truth.rows) {
    argmax[r.hadm_id] = static_cast<int>(std::max_element(r.p.begin(), r.p.end()) - r.p.begin());
  }
  std::size_t hits = 0, n = 0;
  for (const auto& s : cohort.raw.icustays) {
    auto it = argmax.find(s.hadm_id);
    if (it == argmax.end()) continue;
    ++n;
    if (static_cast<int>(bin_los(s.los)) == it->second) ++hits;
  }
  return n ? static_cast<double>(hits) / static_cast<double>(n) : 0.0;
}

}  // namespace neurolos::synth
