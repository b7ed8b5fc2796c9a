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

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "neurolos/pipeline.hpp"
#include "scratch.hpp"

using namespace neurolos;
using namespace neurolos::pipeline;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json tiny_config() {
  return json::parse(R"({
    "name": "tiny",
    "seed": 7,
    "data": {"synthetic": {"n_patients": 150, "seed": 7, "signal_strength": 0.8}},
    "features": {"test_fraction": 0.25, "smote": {"enabled": true, "k_neighbors": 3}},
    "models": [
      {"name": "knn", "kind": "knn", "params": {"n_neighbors": 5}},
      {"name": "forest", "kind": "forest", "params": {"n_estimators": 15, "max_depth": 6}},
      {"name": "lstm", "kind": "lstm", "params": {"hidden": 4},
       "training": {"epochs": 1, "batch_size": 16, "learning_rate": 0.01}, "cells": [[16, 8]]}
    ],
    "sequence": {"max_train_windows": 80, "max_eval_windows": 40},
    "eval": {"folds": 2, "importance": {"enabled": true, "n_repeats": 1}}
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_error(const json& j) {
  try {
    parse_config(j);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kConfig);
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& needle) { return s.find(needle) != std::string::npos; }

}  // namespace

TEST_CASE("sha256 known vectors") {
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("stage lists come back in pipeline order") {
  CHECK(parse_stage_list("all") == all_stages());
  CHECK(all_stages().size() == 9);
  const auto s = parse_stage_list("report,generate, train");
  REQUIRE(s.size() == 3);
  CHECK(s[0] == Stage::kGenerate);
  CHECK(s[1] == Stage::kTrain);
  CHECK(s[2] == Stage::kReport);
  for (auto stage : all_stages()) CHECK(stage_from_string(to_string(stage)) == stage);
  CHECK_THROWS_AS(parse_stage_list("generate,bogus"), Error);
  CHECK_THROWS_AS(parse_stage_list(""), Error);
}

TEST_CASE("the tiny config parses") {
  const auto cfg = parse_config(tiny_config());
  CHECK(cfg.name == "tiny");
  CHECK(cfg.seed == 7);
  REQUIRE(cfg.synthetic.has_value());
  CHECK(cfg.models.size() == 3);
  REQUIRE(cfg.find_model("lstm") != nullptr);
  CHECK(cfg.find_model("lstm")->is_sequence());
  CHECK(cfg.find_model("missing") == nullptr);
}

TEST_CASE("config errors name every offending field") {
  auto j = tiny_config();
  j.erase("seed");
  j["models"][1]["kind"] = "gru";
  j["colour"] = "blue";
  const auto msg = config_error(j);
  CHECK(contains(msg, "seed: required"));
  CHECK(contains(msg, "models[1].kind"));
  CHECK(contains(msg, "gru"));
  CHECK(contains(msg, "colour"));
}

TEST_CASE("config rejects bad parameters and sources") {
  auto j = tiny_config();
  j["models"][0]["params"]["n_neighbours"] = 3;
  CHECK(contains(config_error(j), "n_neighbours"));

  j = tiny_config();
  j["data"]["raw_dir"] = "/nowhere";
  CHECK(!config_error(j).empty());

  j = tiny_config();
  j["data"]["synthetic"].erase("seed");
  CHECK(contains(config_error(j), "data.synthetic.seed"));

  j = tiny_config();
  j["models"][2]["params"] = {{"hidden", 0}};
  CHECK(contains(config_error(j), "models[2]"));

  j = tiny_config();
  j["models"].push_back({{"name", "enc"}, {"kind", "encoder"}, {"params", {{"d_model", 10}, {"n_heads", 3}}}});
  CHECK(contains(config_error(j), "models[3]"));

  j = tiny_config();
  j["models"][1]["name"] = "knn";
  CHECK(!config_error(j).empty());

  j = tiny_config();
  j["_note"] = "notes are allowed";
  CHECK(config_error(j).empty());
}

TEST_CASE("output root precedence") {
  auto cfg = parse_config(tiny_config());
  RunOptions opt;
  ::unsetenv("NEUROLOS_OUT");
  CHECK(resolve_output_dir(cfg, opt) == "neurolos-out");
  cfg.output_dir = "from-config";
  CHECK(resolve_output_dir(cfg, opt) == "from-config");
  ::setenv("NEUROLOS_OUT", "from-env", 1);
  CHECK(resolve_output_dir(cfg, opt) == "from-env");
  opt.out = "from-flag";
  CHECK(resolve_output_dir(cfg, opt) == "from-flag");
  ::unsetenv("NEUROLOS_OUT");
}

TEST_CASE("a later stage without its inputs is a data error") {
  const auto cfg = parse_config(tiny_config());
  RunOptions opt;
  opt.out = testing::scratch_dir("pipeline_missing");
  try {
    run_stages(cfg, {Stage::kTrain}, opt);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kData);
    CHECK(contains(e.what(), "generate"));
  }
}

TEST_CASE("full run, rerun and partial invalidation") {
  const auto cfg = parse_config(tiny_config());
  RunOptions opt;
  opt.out = testing::scratch_dir("pipeline_full");
  opt.emit_ddl = true;
  const fs::path out = opt.out;

  const auto first = run_stages(cfg, all_stages(), opt);
  REQUIRE(first.stages.size() == 9);
  for (const auto& s : first.stages) CHECK_FALSE(s.skipped);
  for (const char* f : {"manifest.json", "report/report.md", "report/model_comparison.csv",
                        "evaluate/predictions/knn.csv", "evaluate/predictions/lstm.csv", "marts/schema.sql",
                        "train/models/forest.json"}) {
    INFO(f);
    CHECK(fs::exists(out / f));
  }
  const auto manifest = json::parse(slurp(out / "manifest.json"));
  CHECK(manifest.at("format") == "neurolos-run-manifest");
  CHECK(manifest.at("stages").size() == 9);
  const auto report = slurp(out / "report/model_comparison.csv");

  SUBCASE("rerun skips every stage and leaves outputs untouched") {
    const auto again = run_stages(cfg, all_stages(), opt);
    for (const auto& s : again.stages) CHECK(s.skipped);
    CHECK(slurp(out / "report/model_comparison.csv") == report);
  }

  SUBCASE("a damaged output reruns its stage only") {
    fs::remove(out / "report/model_comparison.csv");
    const auto again = run_stages(cfg, all_stages(), opt);
    for (const auto& s : again.stages) CHECK(s.skipped == (s.stage != Stage::kReport));
    CHECK(slurp(out / "report/model_comparison.csv") == report);
  }

  SUBCASE("a model change leaves the data stages alone") {
    auto j = tiny_config();
    j["models"][1]["params"]["n_estimators"] = 20;
    const auto changed = parse_config(j);
    const auto again = run_stages(changed, all_stages(), opt);
    for (const auto& s : again.stages) {
      const bool upstream = s.stage == Stage::kGenerate || s.stage == Stage::kIngest ||
                            s.stage == Stage::kMarts || s.stage == Stage::kFeatures;
      CHECK(s.skipped == upstream);
    }
  }

  SUBCASE("thread count does not change outputs") {
    RunOptions par = opt;
    par.out = testing::scratch_dir("pipeline_threads");
    par.threads = 3;
    run_stages(cfg, all_stages(), par);
    for (const char* f : {"report/model_comparison.csv", "evaluate/predictions/forest.csv",
                          "evaluate/predictions/lstm.csv", "report/importance_forest.csv"}) {
      INFO(f);
      CHECK(slurp(fs::path(par.out) / f) == slurp(out / f));
    }
  }
}
