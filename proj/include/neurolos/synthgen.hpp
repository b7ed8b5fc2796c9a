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

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "neurolos/raw_tables.hpp"

namespace neurolos::synth {

// Parameters of a generated cohort. Validation errors name the offending field.
struct CohortSpec {
  std::size_t n_patients = 2000;
  std::uint64_t seed = 42;
  double signal_strength = 0.8;
  double missingness_rate = 0.2;
  double events_per_stay_mean = 40.0;
  // Proportions over the I61*, I63*, G41* primary-diagnosis families.
  std::array<double, 3> icd_mix = {0.35, 0.5, 0.15};
  // Log-normal LOS in days: log(los) ~ N(los_mu, los_sigma^2) marginally.
  double los_mu = 1.0986122886681098;  // log(3)
  double los_sigma = 0.9;
  // Share of admissions whose primary diagnosis is off-target (the neuro
  // code then appears as a secondary diagnosis). Zero keeps every admission
  // in the cohort.
  double off_target_rate = 0.0;
  double second_stay_rate = 0.08;

  void validate() const;
};

// Per-admission Bayes class distribution P(class | severity) and severity.
struct GroundTruthRow {
  std::int64_t hadm_id = 0;
  std::array<double, 3> p = {0, 0, 0};
  double severity = 0.0;
  bool operator==(const GroundTruthRow&) const = default;
};

struct GroundTruth {
  std::vector<GroundTruthRow> rows;
  bool operator==(const GroundTruth&) const = default;
};

// Definition of one generated chart test.
struct TestDefinition {
  std::int64_t itemid;
  std::string label;
  std::string abbreviation;
  std::string category;
  std::string unit;       // empty for unitless
  double center;          // typical healthy value
  double half_range;      // half-width of the normal range
  double direction;       // sign of the deviation under higher acuity
  double gain;            // strength of the acuity signal in this test
  int decimals;
  bool categorical;
};

const std::vector<TestDefinition>& test_catalog();
const std::vector<std::string>& ventilator_modes();
// Abbreviations of every generated test, in catalog order.
std::vector<std::string> default_test_list();

struct Cohort {
  RawTables raw;
  GroundTruth truth;
};

Cohort generate_cohort(const CohortSpec& spec);

// P(class | severity) under the generator's latent model, where
// log(los) = mu + sigma * (rho * severity + sqrt(1 - rho^2) * eps) and
// rho = sqrt(signal_strength).
std::array<double, 3> bayes_class_probabilities(double severity, const CohortSpec& spec);

// Writes the six raw tables plus ground_truth.csv into `dir`.
void emit_tables(const Cohort& cohort, const std::string& dir);
GroundTruth read_ground_truth(const std::string& path);

// Share of ICU stays whose realized LOS class equals the argmax of their
// admission's Bayes distribution.
double bayes_accuracy(const Cohort& cohort);

}  // namespace neurolos::synth
