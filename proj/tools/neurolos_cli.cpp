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

// Command-line front end. Talks to the library only through the C interface.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "CLI11.hpp"
#include "neurolos/neurolos.h"

namespace {

struct Flags {
  std::string config;
  std::string stages = "all";
  std::string out;
  std::uint64_t seed = 0;
  int threads = 0;
  bool emit_ddl = false;
};

int report_failure(nl_status status) {
  std::fprintf(stderr, "neurolos: %s: %s\n", nl_status_name(status), nl_last_error_message());
  // Only 2 (config), 3 (data) and 4 (training) are documented exit codes.
  switch (status) {
    case NL_ERROR_CONFIG:
    case NL_ERROR_INVALID_ARGUMENT:
      return 2;
    case NL_ERROR_DATA:
    case NL_ERROR_IO:
      return 3;
    case NL_ERROR_TRAINING:
      return 4;
    default:
      return 1;
  }
}

int execute(const Flags& flags, const std::string& stages, bool seed_set, bool threads_set) {
  nl_experiment* experiment = nullptr;
  if (auto st = nl_experiment_load(flags.config.c_str(), &experiment); st != NL_OK) return report_failure(st);

  nl_run_options* options = nullptr;
  nl_run_options_create(&options);
  if (!flags.out.empty()) nl_run_options_set_out(options, flags.out.c_str());
  if (seed_set) nl_run_options_set_seed(options, flags.seed);
  if (threads_set) {
    if (auto st = nl_run_options_set_threads(options, flags.threads); st != NL_OK) {
      nl_run_options_free(options);
      nl_experiment_free(experiment);
      return report_failure(st);
    }
  }
  nl_run_options_set_emit_ddl(options, flags.emit_ddl ? 1 : 0);

  nl_run_result* result = nullptr;
  const nl_status st = nl_run(experiment, stages.c_str(), options, &result);
  nl_run_options_free(options);
  nl_experiment_free(experiment);
  if (st != NL_OK) return report_failure(st);

  for (size_t i = 0; i < nl_run_result_stage_count(result); ++i) {
    const char* name = nullptr;
    int skipped = 0;
    double seconds = 0.0;
    nl_run_result_stage(result, i, &name, &skipped, &seconds);
    std::printf("%-10s %s (%.2f s)\n", name, skipped ? "up to date" : "done", seconds);
  }
  std::printf("outputs: %s\n", nl_run_result_out_dir(result));
  nl_run_result_free(result);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"NeuroLOS: ICU length-of-stay class benchmarking pipeline"};
  app.set_version_flag("--version", std::string(nl_version()));
  app.require_subcommand(1);
  Flags flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", flags.config, "Experiment config (JSON)")->required();
    sub->add_option("--out", flags.out, "Output root (overrides NEUROLOS_OUT and the config)");
    sub->add_option("--seed", flags.seed, "Override the experiment seed");
    sub->add_option("--threads", flags.threads, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--emit-ddl", flags.emit_ddl, "Write CREATE TABLE statements for raw tables and marts");
  };

  std::vector<std::pair<CLI::App*, std::string>> stage_commands;
  for (size_t i = 0; i < nl_stage_count(); ++i) {
    const std::string name = nl_stage_name(i);
    auto* sub = app.add_subcommand(name, "Run the " + name + " stage");
    add_common(sub);
    stage_commands.emplace_back(sub, name);
  }
  auto* run = app.add_subcommand("run", "Run several stages in pipeline order");
  add_common(run);
  run->add_option("--stages", flags.stages, "\"all\" or a comma-separated stage list");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::string stages = flags.stages;
  CLI::App* chosen = run;
  for (const auto& [sub, name] : stage_commands) {
    if (sub->parsed()) {
      stages = name;
      chosen = sub;
    }
  }
  const bool seed_set = chosen->count("--seed") > 0;
  const bool threads_set = chosen->count("--threads") > 0;
  return execute(flags, stages, seed_set, threads_set);
}
