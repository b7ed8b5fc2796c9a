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
#include <fstream>
#include <regex>
#include <set>

#include "neurolos/classicml.hpp"
#include "neurolos/pipeline.hpp"

namespace neurolos::pipeline {

using nlohmann::json;

namespace {

// Collects every field problem so one run reports all of them.
class Checker {
 public:
  std::vector<std::string> errors;

  void error(const std::string& path, const std::string& message) { errors.push_back(path + ": " + message); }

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  // Keys starting with '_' are free-form notes and ignored.
  bool object(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) {
      error(path.empty() ? "<root>" : path, "expected an object");
      return false;
    }
    for (const auto& [key, _] : j.items()) {
      if (!key.empty() && key[0] == '_') continue;
      if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
        error(join(path, key), "unknown field");
      }
    }
    return true;
  }

  void size(const json& obj, const std::string& path, const char* key, std::size_t& out, std::size_t lo,
            std::size_t hi = std::numeric_limits<std::size_t>::max()) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number_integer() || v.get<long long>() < 0) {
      error(join(path, key), "expected a non-negative integer");
      return;
    }
    const auto x = v.get<std::size_t>();
    if (x < lo || x > hi) {
      error(join(path, key), "must lie in [" + std::to_string(lo) + ", " +
                                 (hi == std::numeric_limits<std::size_t>::max() ? std::string("inf")
                                                                                : std::to_string(hi)) +
                                 "], got " + std::to_string(x));
      return;
    }
    out = x;
  }

  void seed(const json& obj, const std::string& path, const char* key, std::uint64_t& out, bool required) {
    if (!obj.contains(key)) {
      if (required) error(join(path, key), "required");
      return;
    }
    const auto& v = obj.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      error(join(path, key), "expected a non-negative integer");
      return;
    }
    out = v.get<std::uint64_t>();
  }

  void real(const json& obj, const std::string& path, const char* key, double& out, double lo, double hi,
            bool lo_open = false, bool hi_open = false) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_number()) {
      error(join(path, key), "expected a number");
      return;
    }
    const double x = v.get<double>();
    const bool ok = std::isfinite(x) && (lo_open ? x > lo : x >= lo) && (hi_open ? x < hi : x <= hi);
    if (!ok) {
      error(join(path, key), std::string("must lie in ") + (lo_open ? "(" : "[") + format_double(lo) + ", " +
                                 format_double(hi) + (hi_open ? ")" : "]") + ", got " + format_double(x));
      return;
    }
    out = x;
  }

  void boolean(const json& obj, const std::string& path, const char* key, bool& out) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_boolean()) {
      error(join(path, key), "expected true or false");
      return;
    }
    out = obj.at(key).get<bool>();
  }

  void text(const json& obj, const std::string& path, const char* key, std::string& out,
            const std::vector<std::string>& choices = {}) {
    if (!obj.contains(key)) return;
    if (!obj.at(key).is_string()) {
      error(join(path, key), "expected a string");
      return;
    }
    const auto s = obj.at(key).get<std::string>();
    if (!choices.empty() && std::find(choices.begin(), choices.end(), s) == choices.end()) {
      std::string list;
      for (const auto& c : choices) list += (list.empty() ? "" : ", ") + c;
      error(join(path, key), "unknown value '" + s + "' (expected one of " + list + ")");
      return;
    }
    out = s;
  }

  void sizes(const json& obj, const std::string& path, const char* key, std::vector<std::size_t>& out) {
    if (!obj.contains(key)) return;
    const auto& v = obj.at(key);
    if (!v.is_array() || v.empty()) {
      error(join(path, key), "expected a non-empty array of positive integers");
      return;
    }
    std::vector<std::size_t> xs;
    for (const auto& e : v) {
      if (!e.is_number_integer() || e.get<long long>() < 1) {
        error(join(path, key), "expected a non-empty array of positive integers");
        return;
      }
      xs.push_back(e.get<std::size_t>());
    }
    out = xs;
  }
};

void parse_synthetic(Checker& ck, const json& j, const std::string& path, synth::CohortSpec& spec) {
  if (!ck.object(j, path, {"n_patients", "seed", "signal_strength", "missingness_rate", "events_per_stay_mean",
                           "icd_mix", "los_mu", "los_sigma", "off_target_rate", "second_stay_rate"})) {
    return;
  }
  ck.size(j, path, "n_patients", spec.n_patients, 1);
  ck.seed(j, path, "seed", spec.seed, true);
  ck.real(j, path, "signal_strength", spec.signal_strength, 0.0, 1.0);
  ck.real(j, path, "missingness_rate", spec.missingness_rate, 0.0, 1.0, false, true);
  ck.real(j, path, "events_per_stay_mean", spec.events_per_stay_mean, 0.0, 1e6, true);
  ck.real(j, path, "los_mu", spec.los_mu, -10.0, 10.0);
  ck.real(j, path, "los_sigma", spec.los_sigma, 0.0, 10.0, true);
  ck.real(j, path, "off_target_rate", spec.off_target_rate, 0.0, 1.0, false, true);
  ck.real(j, path, "second_stay_rate", spec.second_stay_rate, 0.0, 1.0);
  if (j.contains("icd_mix")) {
    const auto& m = j.at("icd_mix");
    if (!m.is_array() || m.size() != 3 || !std::all_of(m.begin(), m.end(), [](const json& e) { return e.is_number(); })) {
      ck.error(path + ".icd_mix", "expected three numbers");
    } else {
      for (std::size_t i = 0; i < 3; ++i) spec.icd_mix[i] = m[i].get<double>();
    }
  }
  try {
    spec.validate();
  } catch (const Error& e) {
    ck.error(path, e.what());
  }
}

void parse_model(Checker& ck, const json& j, const std::string& path, std::uint64_t seed, ModelBlock& m) {
  if (!ck.object(j, path, {"name", "label", "kind", "params", "search", "training", "cells"})) return;
  if (!j.contains("name")) ck.error(path + ".name", "required");
  if (!j.contains("kind")) ck.error(path + ".kind", "required");
  ck.text(j, path, "name", m.name);
  if (j.contains("name") && !std::regex_match(m.name, std::regex("[a-z0-9_-]+"))) {
    ck.error(path + ".name", "must match [a-z0-9_-]+");
  }
  m.label = m.name;
  ck.text(j, path, "label", m.label);
  std::vector<std::string> kinds = ml::classic_kinds();
  kinds.push_back("lstm");
  kinds.push_back("encoder");
  ck.text(j, path, "kind", m.kind, kinds);
  if (m.kind.empty()) return;
  if (j.contains("params")) {
    if (!j.at("params").is_object()) {
      ck.error(path + ".params", "expected an object");
      return;
    }
    m.params = j.at("params");
  }
  try {
    if (m.is_sequence()) {
      seq::make_sequence_model(m.kind, 1, m.params, seed);
    } else {
      ml::make_classifier(m.kind, m.params, seed);
    }
  } catch (const Error& e) {
    ck.error(path + ".params", e.what());
  }

  if (m.is_sequence()) {
    if (j.contains("search")) ck.error(path + ".search", "search is only supported for classic models");
    if (j.contains("training") && ck.object(j.at("training"), path + ".training",
                                            {"epochs", "batch_size", "learning_rate", "optimizer", "clip_norm",
                                             "patience"})) {
      const auto& t = j.at("training");
      const std::string tp = path + ".training";
      ck.size(t, tp, "epochs", m.training.epochs, 1);
      ck.size(t, tp, "batch_size", m.training.batch_size, 1);
      ck.real(t, tp, "learning_rate", m.training.learning_rate, 0.0, 10.0);
      ck.real(t, tp, "clip_norm", m.training.clip_norm, 0.0, 1e12);
      ck.size(t, tp, "patience", m.training.patience, 0);
      std::string opt = "adam";
      ck.text(t, tp, "optimizer", opt, {"adam", "sgd"});
      m.training.optimizer = opt == "sgd" ? seq::TrainConfig::Optimizer::kSgd : seq::TrainConfig::Optimizer::kAdam;
    }
    if (j.contains("cells")) {
      const auto& c = j.at("cells");
      bool ok = c.is_array() && !c.empty();
      for (std::size_t i = 0; ok && i < c.size(); ++i) {
        ok = c[i].is_array() && c[i].size() == 2 && c[i][0].is_number_integer() && c[i][1].is_number_integer() &&
             c[i][0].get<long long>() >= 1 && c[i][1].get<long long>() >= 1;
        if (ok) m.cells.emplace_back(c[i][0].get<std::size_t>(), c[i][1].get<std::size_t>());
      }
      if (!ok) ck.error(path + ".cells", "expected a non-empty array of [window, step] pairs of positive integers");
    }
    return;
  }

  if (j.contains("training")) ck.error(path + ".training", "training options apply to sequence models only");
  if (j.contains("cells")) ck.error(path + ".cells", "cells apply to sequence models only");
  if (!j.contains("search")) return;
  const auto& s = j.at("search");
  const std::string sp = path + ".search";
  if (!ck.object(s, sp, {"space", "budget", "folds", "pruning"})) return;
  m.tuned = true;
  if (!s.contains("budget")) ck.error(sp + ".budget", "required");
  ck.size(s, sp, "budget", m.budget, 1);
  ck.size(s, sp, "folds", m.search_folds, 2);
  try {
    if (!s.contains("space") || s.at("space") == "default") {
      m.space = eval::default_search_space(m.kind);
    } else {
      m.space = eval::SearchSpace::from_json(s.at("space"));
    }
    Rng rng = make_rng(seed, 0);
    json probe = m.params;
    const json sampled = m.space.sample(rng);
    for (const auto& [k, v] : sampled.items()) probe[k] = v;
    ml::make_classifier(m.kind, probe, seed);
  } catch (const Error& e) {
    ck.error(sp + ".space", e.what());
  }
  if (s.contains("pruning") && ck.object(s.at("pruning"), sp + ".pruning", {"enabled", "rungs", "keep_fraction"})) {
    const auto& p = s.at("pruning");
    ck.boolean(p, sp + ".pruning", "enabled", m.pruning.enabled);
    ck.real(p, sp + ".pruning", "keep_fraction", m.pruning.keep_fraction, 0.0, 1.0, true);
    if (p.contains("rungs")) {
      const auto& r = p.at("rungs");
      std::vector<double> rungs;
      bool ok = r.is_array();
      for (std::size_t i = 0; ok && i < r.size(); ++i) {
        ok = r[i].is_number() && r[i].get<double>() > 0.0 && r[i].get<double>() < 1.0 &&
             (rungs.empty() || r[i].get<double>() > rungs.back());
        if (ok) rungs.push_back(r[i].get<double>());
      }
      if (ok) {
        m.pruning.rungs = rungs;
      } else {
        ck.error(sp + ".pruning.rungs", "expected ascending fractions in (0, 1)");
      }
    }
  }
}

}  // namespace

const ModelBlock* ExperimentConfig::find_model(const std::string& model_name) const {
  for (const auto& m : models) {
    if (m.name == model_name) return &m;
  }
  return nullptr;
}

ExperimentConfig parse_config(const json& j) {
  Checker ck;
  ExperimentConfig cfg;
  cfg.source = j;
  if (!ck.object(j, "", {"name", "seed", "threads", "output_dir", "data", "marts", "features", "models", "sequence",
                         "eval"})) {
    fail(ErrorKind::kConfig, ck.errors.front());
  }
  ck.text(j, "", "name", cfg.name);
  ck.seed(j, "", "seed", cfg.seed, true);
  std::size_t threads = 1;
  ck.size(j, "", "threads", threads, 1, 1024);
  cfg.threads = static_cast<int>(threads);
  ck.text(j, "", "output_dir", cfg.output_dir);

  if (!j.contains("data")) {
    ck.error("data", "required");
  } else if (ck.object(j.at("data"), "data", {"synthetic", "raw_dir"})) {
    const auto& d = j.at("data");
    const bool syn = d.contains("synthetic"), raw = d.contains("raw_dir");
    if (syn == raw) ck.error("data", "exactly one of data.synthetic or data.raw_dir must be given");
    if (syn) {
      cfg.synthetic.emplace();
      parse_synthetic(ck, d.at("synthetic"), "data.synthetic", *cfg.synthetic);
    }
    if (raw) ck.text(d, "data", "raw_dir", cfg.raw_dir);
  }

  if (j.contains("marts") &&
      ck.object(j.at("marts"), "marts", {"tests", "bin_edges", "aggregation_hours", "sequence_source"})) {
    const auto& m = j.at("marts");
    if (m.contains("tests")) {
      const auto& t = m.at("tests");
      if (!t.is_array() || t.empty() || !std::all_of(t.begin(), t.end(), [](const json& e) { return e.is_string(); })) {
        ck.error("marts.tests", "expected a non-empty array of test abbreviations");
      } else {
        cfg.tests = t.get<std::vector<std::string>>();
      }
    }
    if (m.contains("bin_edges") && ck.object(m.at("bin_edges"), "marts.bin_edges", {"short_upper", "medium_upper"})) {
      ck.real(m.at("bin_edges"), "marts.bin_edges", "short_upper", cfg.bin_edges.short_upper, 0.0, 1e6, true);
      ck.real(m.at("bin_edges"), "marts.bin_edges", "medium_upper", cfg.bin_edges.medium_upper, 0.0, 1e6, true);
      if (cfg.bin_edges.medium_upper <= cfg.bin_edges.short_upper) {
        ck.error("marts.bin_edges", "medium_upper must exceed short_upper");
      }
    }
    ck.real(m, "marts", "aggregation_hours", cfg.aggregation_hours, 0.0, 1e6, true);
    ck.text(m, "marts", "sequence_source", cfg.sequence_source, {"events", "minutes"});
  }

  if (j.contains("features") && ck.object(j.at("features"), "features", {"test_fraction", "smote", "rfe"})) {
    const auto& f = j.at("features");
    ck.real(f, "features", "test_fraction", cfg.test_fraction, 0.0, 1.0, true, true);
    if (f.contains("smote") && ck.object(f.at("smote"), "features.smote", {"enabled", "k_neighbors"})) {
      ck.boolean(f.at("smote"), "features.smote", "enabled", cfg.smote);
      ck.size(f.at("smote"), "features.smote", "k_neighbors", cfg.smote_k, 1);
    }
    if (f.contains("rfe") && ck.object(f.at("rfe"), "features.rfe",
                                       {"enabled", "step", "min_features", "max_features", "cv_folds", "kind",
                                        "params"})) {
      const auto& r = f.at("rfe");
      ck.boolean(r, "features.rfe", "enabled", cfg.rfe.enabled);
      ck.size(r, "features.rfe", "step", cfg.rfe.step, 1);
      ck.size(r, "features.rfe", "min_features", cfg.rfe.min_features, 1);
      ck.size(r, "features.rfe", "max_features", cfg.rfe.max_features, 0);
      ck.size(r, "features.rfe", "cv_folds", cfg.rfe.cv_folds, 2);
      ck.text(r, "features.rfe", "kind", cfg.rfe.kind, ml::classic_kinds());
      if (r.contains("params")) cfg.rfe.params = r.at("params");
      try {
        ml::make_classifier(cfg.rfe.kind, cfg.rfe.params, cfg.seed);
      } catch (const Error& e) {
        ck.error("features.rfe.params", e.what());
      }
    }
  }

  if (!j.contains("models")) {
    ck.error("models", "required");
  } else if (!j.at("models").is_array() || j.at("models").empty()) {
    ck.error("models", "expected a non-empty array of model blocks");
  } else {
    std::set<std::string> names;
    for (std::size_t i = 0; i < j.at("models").size(); ++i) {
      const std::string path = "models[" + std::to_string(i) + "]";
      ModelBlock m;
      parse_model(ck, j.at("models")[i], path, cfg.seed, m);
      if (!m.name.empty() && !names.insert(m.name).second) ck.error(path + ".name", "duplicate model name '" + m.name + "'");
      cfg.models.push_back(std::move(m));
    }
  }

  if (j.contains("sequence") && ck.object(j.at("sequence"), "sequence",
                                          {"window_sizes", "step_sizes", "val_fraction", "max_train_windows",
                                           "max_eval_windows"})) {
    const auto& s = j.at("sequence");
    ck.sizes(s, "sequence", "window_sizes", cfg.sequence.window_sizes);
    ck.sizes(s, "sequence", "step_sizes", cfg.sequence.step_sizes);
    ck.real(s, "sequence", "val_fraction", cfg.sequence.val_fraction, 0.0, 1.0, true, true);
    ck.size(s, "sequence", "max_train_windows", cfg.sequence.max_train_windows, 0);
    ck.size(s, "sequence", "max_eval_windows", cfg.sequence.max_eval_windows, 0);
  }

  if (j.contains("eval") && ck.object(j.at("eval"), "eval", {"folds", "tune_metric", "averaging", "importance"})) {
    const auto& e = j.at("eval");
    ck.size(e, "eval", "folds", cfg.eval.folds, 0);
    if (cfg.eval.folds == 1) ck.error("eval.folds", "must be 0 (disabled) or >= 2");
    ck.text(e, "eval", "tune_metric", cfg.eval.tune_metric);
    if (!eval::is_known_metric(cfg.eval.tune_metric)) ck.error("eval.tune_metric", "unknown metric '" + cfg.eval.tune_metric + "'");
    ck.text(e, "eval", "averaging", cfg.eval.averaging, {"macro", "weighted", "micro"});
    if (e.contains("importance") &&
        ck.object(e.at("importance"), "eval.importance", {"enabled", "n_repeats", "metric"})) {
      const auto& im = e.at("importance");
      ck.boolean(im, "eval.importance", "enabled", cfg.eval.importance.enabled);
      ck.size(im, "eval.importance", "n_repeats", cfg.eval.importance.n_repeats, 1);
      ck.text(im, "eval.importance", "metric", cfg.eval.importance.metric);
      if (!eval::is_known_metric(cfg.eval.importance.metric)) {
        ck.error("eval.importance.metric", "unknown metric '" + cfg.eval.importance.metric + "'");
      }
    }
  }

  if (!ck.errors.empty()) {
    std::string msg = "invalid config:";
    for (const auto& e : ck.errors) msg += "\n  " + e;
    fail(ErrorKind::kConfig, msg);
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kConfig, "cannot read config file " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::kConfig, path + ": not valid JSON: " + e.what());
  }
  return parse_config(j);
}

}  // namespace neurolos::pipeline
