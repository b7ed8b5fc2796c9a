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

/* C interface to the NeuroLOS pipeline and models. Every function returns an
 * nl_status; on failure nl_last_error_message() describes the problem for the
 * calling thread. Handles are opaque and owned by the caller. */

#ifndef NEUROLOS_NEUROLOS_H_
#define NEUROLOS_NEUROLOS_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define NL_API __declspec(dllexport)
#else
#define NL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values 2-4 double as the CLI exit codes. */
typedef enum nl_status {
  NL_OK = 0,
  NL_ERROR_INTERNAL = 1,
  NL_ERROR_CONFIG = 2,
  NL_ERROR_DATA = 3,
  NL_ERROR_TRAINING = 4,
  NL_ERROR_IO = 5,
  NL_ERROR_INVALID_ARGUMENT = 6
} nl_status;

typedef struct nl_experiment nl_experiment;
typedef struct nl_run_options nl_run_options;
typedef struct nl_run_result nl_run_result;
typedef struct nl_model nl_model;

NL_API const char* nl_version(void);
NL_API const char* nl_status_name(nl_status status);
/* Message of the last failed call on this thread; "" after a success. */
NL_API const char* nl_last_error_message(void);

/* Experiment configs. Validation failures list every offending field. */
NL_API nl_status nl_experiment_load(const char* path, nl_experiment** out);
NL_API nl_status nl_experiment_parse(const char* json_text, nl_experiment** out);
NL_API const char* nl_experiment_name(const nl_experiment* experiment);
NL_API void nl_experiment_free(nl_experiment* experiment);

NL_API nl_status nl_run_options_create(nl_run_options** out);
NL_API nl_status nl_run_options_set_out(nl_run_options* options, const char* dir);
NL_API nl_status nl_run_options_set_seed(nl_run_options* options, uint64_t seed);
NL_API nl_status nl_run_options_set_threads(nl_run_options* options, int threads);
NL_API nl_status nl_run_options_set_emit_ddl(nl_run_options* options, int enabled);
NL_API void nl_run_options_free(nl_run_options* options);

/* Stage names in pipeline order: generate, ingest, marts, features, tune,
 * train, evaluate, importance, report. */
NL_API size_t nl_stage_count(void);
NL_API const char* nl_stage_name(size_t index);

/* stages: "all" or a comma-separated list. options may be NULL. result may be
 * NULL when the caller does not need the per-stage outcome. */
NL_API nl_status nl_run(const nl_experiment* experiment, const char* stages, const nl_run_options* options,
                        nl_run_result** result);
NL_API const char* nl_run_result_out_dir(const nl_run_result* result);
NL_API size_t nl_run_result_stage_count(const nl_run_result* result);
NL_API nl_status nl_run_result_stage(const nl_run_result* result, size_t index, const char** name, int* skipped,
                                     double* seconds);
NL_API void nl_run_result_free(nl_run_result* result);

/* Classic models saved by the train stage. x is row-major rows x cols;
 * proba receives rows x 3 class probabilities (short, medium, long). */
NL_API nl_status nl_model_load(const char* path, nl_model** out);
NL_API const char* nl_model_kind(const nl_model* model);
NL_API nl_status nl_model_predict_proba(const nl_model* model, const double* x, size_t rows, size_t cols,
                                        double* proba);
NL_API nl_status nl_model_predict(const nl_model* model, const double* x, size_t rows, size_t cols, int* labels);
NL_API void nl_model_free(nl_model* model);

typedef struct nl_metrics {
  double accuracy;
  double precision[3];
  double recall[3];
  double f1[3];
  double macro_f1;
  double weighted_f1;
  double micro_f1;
  int zero_division;
} nl_metrics;

/* Labels must lie in {0, 1, 2}. */
NL_API nl_status nl_compute_metrics(const int* y_true, const int* y_pred, size_t n, nl_metrics* out);

#ifdef __cplusplus
}
#endif

#endif /* NEUROLOS_NEUROLOS_H_ */
