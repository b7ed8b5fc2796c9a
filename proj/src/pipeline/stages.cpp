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
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "internal.hpp"
#include "neurolos/classicml.hpp"
#include "neurolos/csv.hpp"
#include "neurolos/featureworks.hpp"
#include "neurolos/martstore.hpp"

namespace neurolos::pipeline::detail {

using nlohmann::json;

// ---------------------------------------------------------------- files

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write " + path.string());
  out << text;
  require(out.good(), ErrorKind::kIo, "failed writing " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kData, "missing input " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_json(const fs::path& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

json read_json(const fs::path& path) {
  try {
    return json::parse(read_text(path));
  } catch (const json::exception& e) {
    fail(ErrorKind::kData, path.string() + ": " + e.what());
  }
}

void write_dataset(const fs::path& path, const Dataset& ds) {
  std::ostringstream out;
  std::vector<std::string> row = {"stay_id", "label"};
  row.insert(row.end(), ds.feature_names.begin(), ds.feature_names.end());
  csv::write_row(out, row);
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    row.assign({std::to_string(ds.row_ids[r]), std::to_string(ds.y[r])});
    for (double v : ds.x.row(r)) row.push_back(format_double(v));
    csv::write_row(out, row);
  }
  write_text(path, out.str());
}

Dataset read_dataset(const fs::path& path) {
  const auto t = csv::parse(read_text(path));
  require(t.header.size() >= 2 && t.header[0] == "stay_id" && t.header[1] == "label", ErrorKind::kData,
          path.string() + ": not a feature table");
  Matrix x(0, t.header.size() - 2);
  std::vector<int> y;
  std::vector<std::int64_t> ids;
  std::vector<double> row(t.header.size() - 2);
  for (const auto& r : t.rows) {
    require(r.size() == t.header.size(), ErrorKind::kData, path.string() + ": ragged row");
    ids.push_back(parse_int(r[0]));
    y.push_back(static_cast<int>(parse_int(r[1])));
    for (std::size_t c = 2; c < r.size(); ++c) row[c - 2] = parse_double(r[c]);
    x.append_row(row);
  }
  auto ds = make_dataset(std::move(x), std::move(y), {t.header.begin() + 2, t.header.end()});
  ds.row_ids = std::move(ids);
  return ds;
}

// ---------------------------------------------------------------- helpers

namespace {

std::set<std::int64_t> stay_set(const json& j) {
  const auto v = j.get<std::vector<std::int64_t>>();
  return {v.begin(), v.end()};
}

std::vector<std::string> test_list(const ExperimentConfig& cfg) {
  return cfg.tests.empty() ? synth::default_test_list() : cfg.tests;
}

std::uint64_t model_seed(const Context& ctx, std::uint64_t stream, const std::string& name) {
  // Keyed by a portable hash of the name so adding a model does not reseed the others.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) h = (h ^ c) * 0x100000001b3ULL;
  return derive_seed(ctx.stream(stream), h);
}

json params_file(const Context& ctx) { return read_json(ctx.dir(Stage::kTune) / "params.json"); }

Dataset training_rows(const Context& ctx, const Dataset& train) {
  if (!ctx.cfg.smote) return train;
  return features::smote_oversample(train, ctx.cfg.smote_k, ctx.stream(kSmoteStream)).data;
}

void write_predictions(const fs::path& path, const std::vector<std::int64_t>& ids, const std::vector<std::size_t>* starts,
                       const std::vector<int>& y, const Matrix& proba) {
  std::ostringstream out;
  std::vector<std::string> head = {"stay_id"};
  if (starts) head.push_back("start");
  for (const char* h : {"label", "prediction", "p_short", "p_medium", "p_long"}) head.push_back(h);
  csv::write_row(out, head);
  for (std::size_t i = 0; i < y.size(); ++i) {
    std::vector<std::string> row = {std::to_string(ids[i])};
    if (starts) row.push_back(std::to_string((*starts)[i]));
    row.push_back(std::to_string(y[i]));
    row.push_back(std::to_string(argmax(proba.row(i))));
    for (double p : proba.row(i)) row.push_back(format_double(p));
    csv::write_row(out, row);
  }
  write_text(path, out.str());
}


}  // namespace

std::string events_mart_name(const ExperimentConfig& cfg) {
  return cfg.sequence_source == "minutes" ? "chartevents_by_minute" : "chartevents_original";
}

std::string cell_tag(std::size_t window, std::size_t step) {
  return "w" + std::to_string(window) + "_s" + std::to_string(step);
}

std::vector<std::pair<std::size_t, std::size_t>> model_cells(const ExperimentConfig& cfg, const ModelBlock& m) {
  if (!m.cells.empty()) return m.cells;
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (auto w : cfg.sequence.window_sizes) {
    for (auto s : cfg.sequence.step_sizes) cells.emplace_back(w, s);
  }
  return cells;
}

CellWindows cell_windows(const Context& ctx, const mart::SeriesMart& events, std::size_t window, std::size_t step) {
  const auto split = read_json(ctx.dir(Stage::kMarts) / "split.json");
  const auto test_stays = stay_set(split.at("test_stays"));
  CellWindows out;
  auto all = seq::build_windows(events, window, step, ctx.threads);
  out.stays_too_short = all.stays_too_short;
  std::vector<std::size_t> pool_idx, test_idx;
  for (std::size_t i = 0; i < all.size(); ++i) (test_stays.count(all.stay_id[i]) ? test_idx : pool_idx).push_back(i);
  const auto pool = all.subset(pool_idx);
  std::set<std::int64_t> pool_stays(pool.stay_id.begin(), pool.stay_id.end());
  if (pool_stays.size() < 2 || test_idx.empty()) {
    out.note = "too few stays long enough for this window";
    return out;
  }
  const std::uint64_t s = derive_seed(ctx.stream(kSequenceStream), window * 100003 + step);
  auto [tr, va] = seq::split_by_stay(pool, ctx.cfg.sequence.val_fraction, s);
  out.train = seq::cap_windows(tr, ctx.cfg.sequence.max_train_windows, derive_seed(s, 1));
  out.val = seq::cap_windows(va, ctx.cfg.sequence.max_eval_windows, derive_seed(s, 2));
  out.test = seq::cap_windows(all.subset(test_idx), ctx.cfg.sequence.max_eval_windows, derive_seed(s, 3));
  out.usable = out.train.size() > 0 && out.val.size() > 0 && out.test.size() > 0;
  if (!out.usable) out.note = "empty train, validation or test side";
  return out;
}

json stage_config_slice(const Context& ctx, Stage stage) {
  const auto& src = ctx.cfg.source;
  auto section = [&](const char* key) { return src.contains(key) ? src.at(key) : json(nullptr); };
  json j = {{"seed", ctx.seed}};
  switch (stage) {
    case Stage::kGenerate:
    case Stage::kIngest:
      j = {{"data", section("data")}};
      break;
    case Stage::kMarts:
      j["marts"] = section("marts");
      j["test_fraction"] = ctx.cfg.test_fraction;
      j["emit_ddl"] = ctx.emit_ddl;
      break;
    case Stage::kFeatures:
      j["features"] = section("features");
      break;
    case Stage::kTune:
    case Stage::kTrain:
    case Stage::kEvaluate:
    case Stage::kImportance:
    case Stage::kReport:
      j["features"] = section("features");
      j["models"] = section("models");
      j["sequence"] = section("sequence");
      j["eval"] = section("eval");
      j["name"] = section("name");
      break;
  }
  return j;
}

// ---------------------------------------------------------------- generate / ingest / marts

void run_generate(const Context& ctx) {
  const auto dir = ctx.dir(Stage::kGenerate);
  if (!ctx.cfg.synthetic) {
    write_json(dir / "summary.json", {{"source", "raw"}});
    return;
  }
  const auto cohort = synth::generate_cohort(*ctx.cfg.synthetic);
  synth::emit_tables(cohort, (dir / "raw").string());
  write_json(dir / "summary.json", {{"source", "synthetic"},
                                    {"n_patients", ctx.cfg.synthetic->n_patients},
                                    {"bayes_accuracy", synth::bayes_accuracy(cohort)}});
}

void run_ingest(const Context& ctx) {
  const fs::path src = ctx.cfg.synthetic ? ctx.dir(Stage::kGenerate) / "raw" : fs::path(ctx.cfg.raw_dir);
  require(fs::is_directory(src), ErrorKind::kData, "raw table directory " + src.string() + " does not exist");
  const auto raw = read_raw_tables(src.string());
  validate_raw_tables(raw);
  const auto dir = ctx.dir(Stage::kIngest);
  write_raw_tables(raw, (dir / "tables").string());
  write_json(dir / "summary.json", {{"admissions", raw.admissions.size()},
                                    {"patients", raw.patients.size()},
                                    {"icustays", raw.icustays.size()},
                                    {"diagnoses_icd", raw.diagnoses_icd.size()},
                                    {"chartevents", raw.chartevents.size()},
                                    {"d_items", raw.d_items.size()}});
}

void run_marts(const Context& ctx) {
  const auto raw = read_raw_tables((ctx.dir(Stage::kIngest) / "tables").string());
  const auto hadm = mart::filter_neuro_admissions(raw.diagnoses_icd);
  require(!hadm.empty(), ErrorKind::kData, "no admission has a qualifying primary diagnosis");
  const auto tests = test_list(ctx.cfg);
  mart::StaticMartOptions opt;
  opt.bin_edges = ctx.cfg.bin_edges;
  opt.aggregation_hours = ctx.cfg.aggregation_hours;

  // Labels fix the split; imputation medians are then refitted on training stays only.
  const auto first = mart::build_admissions_mart(raw, hadm, tests, opt);
  std::vector<int> labels;
  for (auto l : first.label) labels.push_back(static_cast<int>(l));
  features::SplitSpec spec;
  spec.test_fraction = ctx.cfg.test_fraction;
  spec.seed = ctx.stream(kSplitStream);
  const auto split = features::stratified_split_indices(labels, spec);
  std::vector<std::int64_t> train_stays, test_stays;
  for (auto i : split.train) train_stays.push_back(first.stay_id[i]);
  for (auto i : split.test) test_stays.push_back(first.stay_id[i]);
  opt.imputation_fit_stays = {train_stays.begin(), train_stays.end()};
  const auto adm = mart::build_admissions_mart(raw, hadm, tests, opt);

  auto events = ctx.cfg.sequence_source == "minutes" ? mart::build_chartevents_by_minute(raw, hadm, tests)
                                                     : mart::build_chartevents_original(raw, hadm, tests);
  events.meta.bin_edges = ctx.cfg.bin_edges;

  const auto dir = ctx.dir(Stage::kMarts);
  mart::save_mart(adm, dir.string());
  mart::save_mart(events, dir.string());
  write_json(dir / "split.json", {{"train_stays", train_stays}, {"test_stays", test_stays}});
  if (ctx.emit_ddl) write_text(dir / "schema.sql", mart::raw_tables_ddl() + mart::mart_ddl(adm) + mart::mart_ddl(events));

  std::array<std::size_t, kNumClasses> counts{};
  for (int l : labels) ++counts[l];
  write_json(dir / "summary.json", {{"admissions_selected", hadm.size()},
                                    {"stays", adm.rows()},
                                    {"class_counts", counts},
                                    {"train_stays", train_stays.size()},
                                    {"test_stays", test_stays.size()},
                                    {"event_rows", events.rows()},
                                    {"skipped_unknown_item", events.meta.skipped_unknown_item},
                                    {"skipped_out_of_stay", events.meta.skipped_out_of_stay},
                                    {"skipped_malformed", events.meta.skipped_malformed}});
}

// ---------------------------------------------------------------- features

void run_features(const Context& ctx) {
  const auto mdir = ctx.dir(Stage::kMarts);
  const auto adm = mart::load_static_mart(mdir.string(), "admissions");
  const auto split = read_json(mdir / "split.json");
  const auto test_stays = stay_set(split.at("test_stays"));
  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t r = 0; r < adm.rows(); ++r) (test_stays.count(adm.stay_id[r]) ? test_rows : train_rows).push_back(r);

  const auto enc = features::FeatureEncoder::fit(adm, train_rows);
  const auto all = enc.transform(adm);
  auto train = all.subset(train_rows);
  auto test = all.subset(test_rows);

  const auto dir = ctx.dir(Stage::kFeatures);
  json summary = {{"encoded_features", enc.feature_names().size()}, {"dropped_constant", enc.dropped()}};
  if (ctx.cfg.rfe.enabled) {
    features::RfeOptions opt;
    opt.step_k = ctx.cfg.rfe.step;
    opt.min_features = std::min(ctx.cfg.rfe.min_features, train.cols());
    opt.max_features = ctx.cfg.rfe.max_features;
    opt.cv_folds = ctx.cfg.rfe.cv_folds;
    opt.seed = ctx.stream(kRfeStream);
    opt.smote_k = ctx.cfg.smote ? ctx.cfg.smote_k : 0;
    opt.threads = ctx.threads;
    const auto factory = ml::classifier_factory(ctx.cfg.rfe.kind, ctx.cfg.rfe.params, ctx.stream(kRfeStream), 1);
    const auto res = features::rfe_select(train, factory, opt);
    write_text(dir / "rfe_trace.csv", features::rfe_trace_csv(res));
    train = train.select_features(res.selected);
    test = test.select_features(res.selected);
    summary["rfe_selected"] = res.selected_names;
  }
  summary["features"] = train.feature_names;
  write_json(dir / "encoder.json", enc.to_json());
  write_dataset(dir / "train.csv", train);
  write_dataset(dir / "test.csv", test);
  write_json(dir / "summary.json", summary);
}

// ---------------------------------------------------------------- tune

void run_tune(const Context& ctx) {
  const auto train = read_dataset(ctx.dir(Stage::kFeatures) / "train.csv");
  const auto dir = ctx.dir(Stage::kTune);
  const auto& labels = train.y;
  json params = json::object();
  for (const auto& m : ctx.cfg.models) {
    if (m.is_sequence()) continue;
    json entry = {{"kind", m.kind}, {"params", m.params}, {"tuned", m.tuned}};
    if (m.tuned) {
      const std::uint64_t seed = model_seed(ctx, kTuneStream, m.name);
      const std::size_t smote_k = ctx.cfg.smote ? ctx.cfg.smote_k : 0;
      const std::string metric = ctx.cfg.eval.tune_metric;
      const eval::Objective objective = [&](const json& sampled, double resource) {
        json merged = m.params;
        for (const auto& [k, v] : sampled.items()) merged[k] = v;
        Dataset part = train;
        if (resource < 1.0) {
          features::SplitSpec spec;
          spec.test_fraction = 1.0 - resource;
          spec.seed = seed;
          part = train.subset(features::stratified_split_indices(labels, spec).train);
        }
        eval::CvOptions cv;
        cv.k_folds = m.search_folds;
        cv.seed = seed;
        cv.smote_k = smote_k;
        const auto res = eval::cross_validate(part, ml::classifier_factory(m.kind, merged, seed, 1), cv);
        double total = 0.0;
        for (const auto& f : res.folds) total += eval::metric_value(f, metric);
        return total / static_cast<double>(res.folds.size());
      };
      const auto result = eval::random_search(m.space, objective, m.budget, seed, m.pruning, ctx.threads);
      write_text(dir / (m.name + "_trials.csv"), eval::trial_log_csv(result, m.space, m.pruning));
      json merged = m.params;
      for (const auto& [k, v] : result.best_trial().params.items()) merged[k] = v;
      entry["params"] = merged;
      entry["search_score"] = result.best_trial().score;
      entry["search_metric"] = metric;
    }
    params[m.name] = entry;
  }
  write_json(dir / "params.json", params);
}

// ---------------------------------------------------------------- train

void run_train(const Context& ctx) {
  const auto dir = ctx.dir(Stage::kTrain);
  const auto params = params_file(ctx);
  const auto train = read_dataset(ctx.dir(Stage::kFeatures) / "train.csv");
  const auto fit_rows = training_rows(ctx, train);
  fs::create_directories(dir / "models");

  std::ostringstream cv_csv;
  csv::write_row(cv_csv, {"model", "folds", "accuracy_mean", "accuracy_std", "macro_f1_mean", "macro_f1_std",
                          "weighted_f1_mean", "weighted_f1_std"});
  for (const auto& m : ctx.cfg.models) {
    if (m.is_sequence()) continue;
    const auto& p = params.at(m.name).at("params");
    const std::uint64_t seed = model_seed(ctx, kTrainStream, m.name);
    auto model = ml::make_classifier(m.kind, p, seed);
    model->set_threads(ctx.threads);
    try {
      model->fit(fit_rows);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kTraining) throw;
      fail(ErrorKind::kTraining, m.name + ": " + e.what());
    }
    ml::save_model(*model, (dir / "models" / (m.name + ".json")).string());
    if (ctx.cfg.eval.folds >= 2) {
      eval::CvOptions cv;
      cv.k_folds = ctx.cfg.eval.folds;
      cv.seed = ctx.stream(kCvStream);
      cv.smote_k = ctx.cfg.smote ? ctx.cfg.smote_k : 0;
      cv.threads = ctx.threads;
      const auto res = eval::cross_validate(train, ml::classifier_factory(m.kind, p, seed, 1), cv);
      csv::write_row(cv_csv, {m.label, std::to_string(cv.k_folds), format_double(res.accuracy.mean),
                              format_double(res.accuracy.std), format_double(res.macro_f1.mean),
                              format_double(res.macro_f1.std), format_double(res.weighted_f1.mean),
                              format_double(res.weighted_f1.std)});
    }
  }
  if (ctx.cfg.eval.folds >= 2) write_text(dir / "cv.csv", cv_csv.str());

  std::set<std::pair<std::size_t, std::size_t>> cells;
  for (const auto& m : ctx.cfg.models) {
    if (!m.is_sequence()) continue;
    for (auto c : model_cells(ctx.cfg, m)) cells.insert(c);
  }
  if (cells.empty()) return;
  const auto events = mart::load_series_mart(ctx.dir(Stage::kMarts).string(), events_mart_name(ctx.cfg));
  std::ostringstream windows_csv;
  csv::write_row(windows_csv, {"window", "step", "train_windows", "val_windows", "test_windows", "stays_too_short",
                               "train_short", "train_medium", "train_long", "note"});
  for (const auto& [w, s] : cells) {
    const auto cw = cell_windows(ctx, events, w, s);
    const auto cc = cw.train.class_counts();
    csv::write_row(windows_csv, {std::to_string(w), std::to_string(s), std::to_string(cw.train.size()),
                                 std::to_string(cw.val.size()), std::to_string(cw.test.size()),
                                 std::to_string(cw.stays_too_short), std::to_string(cc[0]), std::to_string(cc[1]),
                                 std::to_string(cc[2]), cw.note});
    if (!cw.usable) continue;
    for (const auto& m : ctx.cfg.models) {
      if (!m.is_sequence()) continue;
      const auto mc = model_cells(ctx.cfg, m);
      if (std::find(mc.begin(), mc.end(), std::make_pair(w, s)) == mc.end()) continue;
      const std::uint64_t seed = derive_seed(model_seed(ctx, kSequenceStream, m.name), w * 100003 + s);
      auto model = seq::make_sequence_model(m.kind, cw.train.channels(), m.params, seed);
      auto tc = m.training;
      tc.seed = seed;
      tc.threads = ctx.threads;
      seq::TrainResult res;
      try {
        res = seq::train_sequence_model(*model, cw.train, cw.val, tc);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::kTraining) throw;
        fail(ErrorKind::kTraining, m.name + " (" + cell_tag(w, s) + "): " + e.what());
      }
      const auto stem = dir / "sequence" / (m.name + "_" + cell_tag(w, s));
      fs::create_directories(stem.parent_path());
      seq::save_sequence_model(*model, stem.string() + ".json");
      write_text(stem.string() + "_history.csv", seq::history_csv(res));
    }
  }
  write_text(dir / "windows.csv", windows_csv.str());
}

// ---------------------------------------------------------------- evaluate

namespace {

struct SeqCellResult {
  std::size_t window, step;
  double val_accuracy;
  eval::MetricsReport report;
};

// Validation accuracy of the kept parameters: best epoch when early stopping, else the last.
double kept_val_accuracy(const fs::path& history, const ModelBlock& m) {
  const auto t = csv::parse(read_text(history));
  require(!t.rows.empty(), ErrorKind::kData, history.string() + ": empty history");
  const auto acc = t.column("val_accuracy");
  if (m.training.patience == 0) return parse_double(t.rows.back()[acc]);
  const auto loss = t.column("val_loss");
  std::size_t best = 0;
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    if (parse_double(t.rows[i][loss]) < parse_double(t.rows[best][loss])) best = i;
  }
  return parse_double(t.rows[best][acc]);
}

}  // namespace

void run_evaluate(const Context& ctx) {
  const auto dir = ctx.dir(Stage::kEvaluate);
  const auto tdir = ctx.dir(Stage::kTrain);
  const auto test = read_dataset(ctx.dir(Stage::kFeatures) / "test.csv");
  for (const auto& m : ctx.cfg.models) {
    if (m.is_sequence()) continue;
    const auto model = ml::load_model((tdir / "models" / (m.name + ".json")).string());
    write_predictions(dir / "predictions" / (m.name + ".csv"), test.row_ids, nullptr, test.y,
                      model->predict_proba(test.x));
  }

  std::ostringstream grid;
  csv::write_row(grid, {"model", "window", "step", "val_accuracy", "test_windows", "accuracy", "weighted_f1",
                        "macro_f1"});
  json best_cells = json::object();
  std::map<std::string, std::vector<SeqCellResult>> per_model;
  std::set<std::pair<std::size_t, std::size_t>> cells;
  for (const auto& m : ctx.cfg.models) {
    if (!m.is_sequence()) continue;
    for (auto c : model_cells(ctx.cfg, m)) cells.insert(c);
  }
  if (!cells.empty()) {
    const auto events = mart::load_series_mart(ctx.dir(Stage::kMarts).string(), events_mart_name(ctx.cfg));
    for (const auto& [w, s] : cells) {
      const CellWindows cw = cell_windows(ctx, events, w, s);
      if (!cw.usable) continue;
      for (const auto& m : ctx.cfg.models) {
        if (!m.is_sequence()) continue;
        const auto stem = tdir / "sequence" / (m.name + "_" + cell_tag(w, s));
        if (!fs::exists(stem.string() + ".json")) continue;
        const auto model = seq::load_sequence_model(stem.string() + ".json");
        const auto proba = model->predict_proba(cw.test, ctx.threads);
        std::vector<int> pred(cw.test.size());
        for (std::size_t i = 0; i < pred.size(); ++i) pred[i] = argmax(proba.row(i));
        SeqCellResult r{w, s, kept_val_accuracy(stem.string() + "_history.csv", m),
                        eval::compute_metrics(cw.test.y, pred)};
        csv::write_row(grid, {m.label, std::to_string(w), std::to_string(s), format_double(r.val_accuracy),
                              std::to_string(cw.test.size()), format_double(r.report.accuracy),
                              format_double(r.report.weighted.f1), format_double(r.report.macro.f1)});
        // Cells are visited in ascending (window, step); strict improvement keeps the first best.
        auto& list = per_model[m.name];
        const bool better = list.empty() || std::none_of(list.begin(), list.end(), [&](const SeqCellResult& o) {
                              return o.val_accuracy >= r.val_accuracy;
                            });
        list.push_back(r);
        if (better) {
          best_cells[m.name] = {{"window", w}, {"step", s}, {"val_accuracy", r.val_accuracy}};
          write_predictions(dir / "predictions" / (m.name + ".csv"), cw.test.stay_id, &cw.test.start, cw.test.y,
                            proba);
        }
      }
    }
    write_text(dir / "grid.csv", grid.str());
  }
  write_json(dir / "best_cells.json", best_cells);
}

// ---------------------------------------------------------------- importance

void run_importance(const Context& ctx) {
  const auto dir = ctx.dir(Stage::kImportance);
  const auto& opt = ctx.cfg.eval.importance;
  if (!opt.enabled) {
    write_json(dir / "summary.json", {{"enabled", false}});
    return;
  }
  const auto test = read_dataset(ctx.dir(Stage::kFeatures) / "test.csv");
  const auto tdir = ctx.dir(Stage::kTrain);
  for (const auto& m : ctx.cfg.models) {
    if (m.is_sequence()) continue;
    const auto model = ml::load_model((tdir / "models" / (m.name + ".json")).string());
    const auto res = eval::permutation_importance(*model, test, opt.metric, opt.n_repeats,
                                                  model_seed(ctx, kImportanceStream, m.name), ctx.threads);
    write_text(dir / (m.name + ".csv"), eval::importance_csv(res));
  }

  const auto best = read_json(ctx.dir(Stage::kEvaluate) / "best_cells.json");
  if (!best.empty()) {
    const auto events = mart::load_series_mart(ctx.dir(Stage::kMarts).string(), events_mart_name(ctx.cfg));
    for (const auto& m : ctx.cfg.models) {
      if (!m.is_sequence() || !best.contains(m.name)) continue;
      const std::size_t w = best.at(m.name).at("window"), s = best.at(m.name).at("step");
      const auto cw = cell_windows(ctx, events, w, s);
      const auto model = seq::load_sequence_model((tdir / "sequence" / (m.name + "_" + cell_tag(w, s))).string() + ".json");
      // One group per test (value, in-norm flag and mask together) plus elapsed time.
      std::vector<std::string> names;
      std::vector<std::vector<std::size_t>> groups;
      const auto& ch = cw.test.channel_names;
      for (std::size_t c = 0; c + 1 < ch.size(); c += 3) {
        names.push_back(ch[c].substr(0, ch[c].find("__")));
        groups.push_back({c, c + 1, c + 2});
      }
      names.push_back(ch.back());
      groups.push_back({ch.size() - 1});
      const auto baseline_pred = model->predict(cw.test, 1);
      const double baseline = eval::metric_value(eval::compute_metrics(cw.test.y, baseline_pred), opt.metric);
      const eval::PermutedScore score = [&](std::size_t g, std::span<const std::size_t> perm) {
        seq::WindowSet shuffled = cw.test;
        for (std::size_t i = 0; i < shuffled.size(); ++i) {
          for (std::size_t t = 0; t < w; ++t) {
            for (auto c : groups[g]) shuffled.x[i](t, c) = cw.test.x[perm[i]](t, c);
          }
        }
        return eval::metric_value(eval::compute_metrics(shuffled.y, model->predict(shuffled, 1)), opt.metric);
      };
      auto res = eval::permutation_importance(names, cw.test.size(), baseline, score, opt.n_repeats,
                                              model_seed(ctx, kImportanceStream, m.name), ctx.threads);
      res.metric = opt.metric;
      write_text(dir / (m.name + ".csv"), eval::importance_csv(res));
    }
  }
  write_json(dir / "summary.json", {{"enabled", true}, {"metric", opt.metric}, {"n_repeats", opt.n_repeats}});
}

}  // namespace neurolos::pipeline::detail
