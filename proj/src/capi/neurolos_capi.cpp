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

#include "neurolos/neurolos.h"

#include <exception>
#include <filesystem>
#include <new>
#include <string>

#include "neurolos/classicml.hpp"
#include "neurolos/metrics.hpp"
#include "neurolos/pipeline.hpp"

using namespace neurolos;

struct nl_experiment {
  pipeline::ExperimentConfig cfg;
};

struct nl_run_options {
  pipeline::RunOptions options;
};

struct nl_run_result {
  pipeline::RunSummary summary;
  std::vector<std::string> names;
};

struct nl_model {
  std::unique_ptr<Classifier> model;
  std::string kind;
};

namespace {

thread_local std::string g_last_error;

nl_status status_of(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig:
    case ErrorKind::kUnsupported:
      return NL_ERROR_CONFIG;
    case ErrorKind::kData:
    case ErrorKind::kSchema:
      return NL_ERROR_DATA;
    case ErrorKind::kTraining:
      return NL_ERROR_TRAINING;
    case ErrorKind::kIo:
      return NL_ERROR_IO;
    case ErrorKind::kValidation:
      return NL_ERROR_INVALID_ARGUMENT;
    case ErrorKind::kInternal:
      return NL_ERROR_INTERNAL;
  }
  return NL_ERROR_INTERNAL;
}

template <typename Fn>
nl_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return NL_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return NL_ERROR_IO;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return NL_ERROR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return NL_ERROR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown failure";
    return NL_ERROR_INTERNAL;
  }
}

nl_status invalid(const char* what) {
  g_last_error = what;
  return NL_ERROR_INVALID_ARGUMENT;
}

}  // namespace

extern "C" {

const char* nl_version(void) { return pipeline::kVersion; }

const char* nl_status_name(nl_status status) {
  switch (status) {
    case NL_OK: return "ok";
    case NL_ERROR_INTERNAL: return "internal error";
    case NL_ERROR_CONFIG: return "config error";
    case NL_ERROR_DATA: return "data error";
    case NL_ERROR_TRAINING: return "training failure";
    case NL_ERROR_IO: return "i/o error";
    case NL_ERROR_INVALID_ARGUMENT: return "invalid argument";
  }
  return "unknown status";
}

const char* nl_last_error_message(void) { return g_last_error.c_str(); }

nl_status nl_experiment_load(const char* path, nl_experiment** out) {
  if (path == nullptr || out == nullptr) return invalid("nl_experiment_load: null argument");
  *out = nullptr;
  return guarded([&] { *out = new nl_experiment{pipeline::load_config(path)}; });
}

nl_status nl_experiment_parse(const char* json_text, nl_experiment** out) {
  if (json_text == nullptr || out == nullptr) return invalid("nl_experiment_parse: null argument");
  *out = nullptr;
  return guarded([&] {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::exception& e) {
      fail(ErrorKind::kConfig, std::string("config is not valid JSON: ") + e.what());
    }
    *out = new nl_experiment{pipeline::parse_config(j)};
  });
}

const char* nl_experiment_name(const nl_experiment* experiment) {
  return experiment == nullptr ? "" : experiment->cfg.name.c_str();
}

void nl_experiment_free(nl_experiment* experiment) { delete experiment; }

nl_status nl_run_options_create(nl_run_options** out) {
  if (out == nullptr) return invalid("nl_run_options_create: null argument");
  return guarded([&] { *out = new nl_run_options{}; });
}

nl_status nl_run_options_set_out(nl_run_options* options, const char* dir) {
  if (options == nullptr || dir == nullptr) return invalid("nl_run_options_set_out: null argument");
  options->options.out = dir;
  return NL_OK;
}

nl_status nl_run_options_set_seed(nl_run_options* options, uint64_t seed) {
  if (options == nullptr) return invalid("nl_run_options_set_seed: null argument");
  options->options.seed = seed;
  return NL_OK;
}

nl_status nl_run_options_set_threads(nl_run_options* options, int threads) {
  if (options == nullptr) return invalid("nl_run_options_set_threads: null argument");
  if (threads < 1) return invalid("threads must be >= 1");
  options->options.threads = threads;
  return NL_OK;
}

nl_status nl_run_options_set_emit_ddl(nl_run_options* options, int enabled) {
  if (options == nullptr) return invalid("nl_run_options_set_emit_ddl: null argument");
  options->options.emit_ddl = enabled != 0;
  return NL_OK;
}

void nl_run_options_free(nl_run_options* options) { delete options; }

size_t nl_stage_count(void) { return pipeline::all_stages().size(); }

const char* nl_stage_name(size_t index) {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> v;
    for (auto s : pipeline::all_stages()) v.push_back(pipeline::to_string(s));
    return v;
  }();
  return index < names.size() ? names[index].c_str() : nullptr;
}

nl_status nl_run(const nl_experiment* experiment, const char* stages, const nl_run_options* options,
                 nl_run_result** result) {
  if (experiment == nullptr || stages == nullptr) return invalid("nl_run: null argument");
  if (result != nullptr) *result = nullptr;
  return guarded([&] {
    const auto list = pipeline::parse_stage_list(stages);
    auto summary = pipeline::run_stages(experiment->cfg, list, options ? options->options : pipeline::RunOptions{});
    if (result != nullptr) {
      auto* r = new nl_run_result{std::move(summary), {}};
      for (const auto& s : r->summary.stages) r->names.push_back(pipeline::to_string(s.stage));
      *result = r;
    }
  });
}

const char* nl_run_result_out_dir(const nl_run_result* result) {
  return result == nullptr ? "" : result->summary.out_dir.c_str();
}

size_t nl_run_result_stage_count(const nl_run_result* result) {
  return result == nullptr ? 0 : result->summary.stages.size();
}

nl_status nl_run_result_stage(const nl_run_result* result, size_t index, const char** name, int* skipped,
                              double* seconds) {
  if (result == nullptr || index >= result->summary.stages.size()) return invalid("nl_run_result_stage: bad index");
  const auto& s = result->summary.stages[index];
  if (name) *name = result->names[index].c_str();
  if (skipped) *skipped = s.skipped ? 1 : 0;
  if (seconds) *seconds = s.seconds;
  return NL_OK;
}

void nl_run_result_free(nl_run_result* result) { delete result; }

nl_status nl_model_load(const char* path, nl_model** out) {
  if (path == nullptr || out == nullptr) return invalid("nl_model_load: null argument");
  *out = nullptr;
  return guarded([&] {
    auto m = ml::load_model(path);
    auto kind = m->kind();
    *out = new nl_model{std::move(m), std::move(kind)};
  });
}

const char* nl_model_kind(const nl_model* model) { return model == nullptr ? "" : model->kind.c_str(); }

nl_status nl_model_predict_proba(const nl_model* model, const double* x, size_t rows, size_t cols, double* proba) {
  if (model == nullptr || (rows > 0 && (x == nullptr || proba == nullptr))) {
    return invalid("nl_model_predict_proba: null argument");
  }
  return guarded([&] {
    Matrix m(rows, cols);
    std::copy(x, x + rows * cols, m.data().begin());
    const auto p = model->model->predict_proba(m);
    std::copy(p.data().begin(), p.data().end(), proba);
  });
}

nl_status nl_model_predict(const nl_model* model, const double* x, size_t rows, size_t cols, int* labels) {
  if (model == nullptr || (rows > 0 && (x == nullptr || labels == nullptr))) {
    return invalid("nl_model_predict: null argument");
  }
  return guarded([&] {
    Matrix m(rows, cols);
    std::copy(x, x + rows * cols, m.data().begin());
    const auto y = model->model->predict(m);
    std::copy(y.begin(), y.end(), labels);
  });
}

void nl_model_free(nl_model* model) { delete model; }

nl_status nl_compute_metrics(const int* y_true, const int* y_pred, size_t n, nl_metrics* out) {
  if (y_true == nullptr || y_pred == nullptr || out == nullptr) return invalid("nl_compute_metrics: null argument");
  return guarded([&] {
    const auto r = eval::compute_metrics(std::span<const int>(y_true, n), std::span<const int>(y_pred, n));
    out->accuracy = r.accuracy;
    for (int c = 0; c < 3; ++c) {
      out->precision[c] = r.precision[c];
      out->recall[c] = r.recall[c];
      out->f1[c] = r.f1[c];
    }
    out->macro_f1 = r.macro.f1;
    out->weighted_f1 = r.weighted.f1;
    out->micro_f1 = r.micro.f1;
    out->zero_division = r.zero_division ? 1 : 0;
  });
}

}  // extern "C"
