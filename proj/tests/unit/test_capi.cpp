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

// Links only the shared library and its C header.

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "neurolos/neurolos.h"
#include "scratch.hpp"

namespace {

const char* kTiny = R"({
  "name": "capi",
  "seed": 3,
  "data": {"synthetic": {"n_patients": 120, "seed": 3}},
  "models": [{"name": "forest", "kind": "forest", "params": {"n_estimators": 10, "max_depth": 5}}],
  "eval": {"folds": 0, "importance": {"enabled": false}}
})";

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

}  // namespace

TEST_CASE("status names and version") {
  CHECK(std::string(nl_version()) == "0.1.0");
  CHECK(std::string(nl_status_name(NL_OK)) == "ok");
  CHECK(NL_ERROR_CONFIG == 2);
  CHECK(NL_ERROR_DATA == 3);
  CHECK(NL_ERROR_TRAINING == 4);
  CHECK(nl_stage_count() == 9);
  CHECK(std::string(nl_stage_name(0)) == "generate");
  CHECK(std::string(nl_stage_name(8)) == "report");
  CHECK(nl_stage_name(9) == nullptr);
}

TEST_CASE("bad input maps to status codes") {
  nl_experiment* exp = nullptr;
  CHECK(nl_experiment_parse("{not json", &exp) == NL_ERROR_CONFIG);
  CHECK(exp == nullptr);
  CHECK(std::strlen(nl_last_error_message()) > 0);
  CHECK(nl_experiment_parse(R"({"seed": 1, "models": [{"name": "a", "kind": "gru"}]})", &exp) == NL_ERROR_CONFIG);
  CHECK(std::string(nl_last_error_message()).find("models[0].kind") != std::string::npos);
  CHECK(nl_experiment_parse(nullptr, &exp) == NL_ERROR_INVALID_ARGUMENT);
  CHECK(nl_experiment_load("/nonexistent/config.json", &exp) != NL_OK);

  nl_model* model = nullptr;
  CHECK(nl_model_load("/nonexistent/model.json", &model) != NL_OK);

  const int y[] = {0, 1, 3};
  nl_metrics m;
  CHECK(nl_compute_metrics(y, y, 3, &m) == NL_ERROR_INVALID_ARGUMENT);
}

TEST_CASE("metrics through the C interface") {
  const int y_true[] = {0, 0, 1, 1, 2, 2};
  const int y_pred[] = {0, 1, 1, 1, 2, 0};
  nl_metrics m;
  REQUIRE(nl_compute_metrics(y_true, y_pred, 6, &m) == NL_OK);
  CHECK(m.accuracy == doctest::Approx(4.0 / 6.0));
  CHECK(m.precision[1] == doctest::Approx(2.0 / 3.0));
  CHECK(m.recall[0] == doctest::Approx(0.5));
  CHECK(m.micro_f1 == doctest::Approx(m.accuracy));
}

TEST_CASE("run a tiny experiment and score with the saved model") {
  nl_experiment* exp = nullptr;
  REQUIRE(nl_experiment_parse(kTiny, &exp) == NL_OK);
  CHECK(std::string(nl_experiment_name(exp)) == "capi");

  const std::string out = neurolos::testing::scratch_dir("capi_run");
  nl_run_options* opt = nullptr;
  REQUIRE(nl_run_options_create(&opt) == NL_OK);
  REQUIRE(nl_run_options_set_out(opt, out.c_str()) == NL_OK);
  REQUIRE(nl_run_options_set_threads(opt, 2) == NL_OK);
  CHECK(nl_run_options_set_threads(opt, 0) == NL_ERROR_INVALID_ARGUMENT);

  CHECK(nl_run(exp, "train", opt, nullptr) == NL_ERROR_DATA);

  nl_run_result* result = nullptr;
  INFO(std::string(nl_last_error_message()));
  REQUIRE(nl_run(exp, "generate,ingest,marts,features,tune,train", opt, &result) == NL_OK);
  CHECK(std::string(nl_run_result_out_dir(result)) == out);
  REQUIRE(nl_run_result_stage_count(result) == 6);
  const char* name = nullptr;
  int skipped = -1;
  double seconds = -1.0;
  REQUIRE(nl_run_result_stage(result, 5, &name, &skipped, &seconds) == NL_OK);
  CHECK(std::string(name) == "train");
  CHECK(skipped == 0);
  CHECK(seconds >= 0.0);
  CHECK(nl_run_result_stage(result, 6, &name, &skipped, &seconds) == NL_ERROR_INVALID_ARGUMENT);
  nl_run_result_free(result);

  nl_model* model = nullptr;
  REQUIRE(nl_model_load((out + "/train/models/forest.json").c_str(), &model) == NL_OK);
  CHECK(std::string(nl_model_kind(model)) == "forest");

  std::ifstream in(out + "/features/test.csv");
  std::string line;
  REQUIRE(std::getline(in, line));
  const std::size_t cols = split(line).size() - 2;  // stay_id, label
  std::vector<double> x;
  std::vector<int> y;
  while (std::getline(in, line)) {
    const auto cells = split(line);
    REQUIRE(cells.size() == cols + 2);
    y.push_back(std::stoi(cells[1]));
    for (std::size_t c = 2; c < cells.size(); ++c) x.push_back(std::stod(cells[c]));
  }
  const std::size_t rows = y.size();
  REQUIRE(rows > 0);

  std::vector<double> proba(rows * 3);
  std::vector<int> pred(rows);
  REQUIRE(nl_model_predict_proba(model, x.data(), rows, cols, proba.data()) == NL_OK);
  REQUIRE(nl_model_predict(model, x.data(), rows, cols, pred.data()) == NL_OK);
  for (std::size_t r = 0; r < rows; ++r) {
    CHECK(proba[3 * r] + proba[3 * r + 1] + proba[3 * r + 2] == doctest::Approx(1.0));
    CHECK(pred[r] >= 0);
    CHECK(pred[r] <= 2);
  }
  CHECK(nl_model_predict(model, x.data(), rows, cols + 1, pred.data()) != NL_OK);

  nl_metrics m;
  REQUIRE(nl_compute_metrics(y.data(), pred.data(), rows, &m) == NL_OK);
  CHECK(m.accuracy > 0.0);

  nl_model_free(model);
  nl_run_options_free(opt);
  nl_experiment_free(exp);
}
