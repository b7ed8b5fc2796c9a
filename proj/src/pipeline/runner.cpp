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

#include <openssl/evp.h>

#include <chrono>
#include <cstdlib>
#include <fstream>

#include "internal.hpp"

namespace neurolos::pipeline {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::vector<std::pair<Stage, const char*>>& stage_table() {
  static const std::vector<std::pair<Stage, const char*>> t = {
      {Stage::kGenerate, "generate"}, {Stage::kIngest, "ingest"},         {Stage::kMarts, "marts"},
      {Stage::kFeatures, "features"}, {Stage::kTune, "tune"},             {Stage::kTrain, "train"},
      {Stage::kEvaluate, "evaluate"}, {Stage::kImportance, "importance"}, {Stage::kReport, "report"},
  };
  return t;
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new()) {
    require(ctx_ != nullptr && EVP_DigestInit_ex(ctx_, EVP_sha256(), nullptr) == 1, ErrorKind::kInternal,
            "SHA-256 initialisation failed");
  }
  ~Sha256() { EVP_MD_CTX_free(ctx_); }
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t n) {
    require(EVP_DigestUpdate(ctx_, data, n) == 1, ErrorKind::kInternal, "SHA-256 update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    require(EVP_DigestFinal_ex(ctx_, md, &len) == 1, ErrorKind::kInternal, "SHA-256 finalisation failed");
    static const char* digits = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
      out.push_back(digits[md[i] >> 4]);
      out.push_back(digits[md[i] & 15]);
    }
    return out;
  }

 private:
  EVP_MD_CTX* ctx_;
};

struct FileEntry {
  std::string path;  // relative, generic separators
  std::string sha256;
  std::uintmax_t bytes = 0;
};

std::vector<FileEntry> list_files(const fs::path& root, const fs::path& dir, const std::set<std::string>& skip = {}) {
  std::vector<FileEntry> out;
  if (!fs::exists(dir)) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), root).generic_string();
    if (skip.count(rel)) continue;
    out.push_back({rel, sha256_file(e.path().string()), e.file_size()});
  }
  std::sort(out.begin(), out.end(), [](const FileEntry& a, const FileEntry& b) { return a.path < b.path; });
  return out;
}

json to_json(const std::vector<FileEntry>& files) {
  json a = json::array();
  for (const auto& f : files) a.push_back({{"path", f.path}, {"sha256", f.sha256}, {"bytes", f.bytes}});
  return a;
}

fs::path stamp_path(const fs::path& root, Stage s) { return root / "stamps" / (to_string(s) + ".json"); }

std::optional<json> read_stamp(const fs::path& root, Stage s) {
  const auto p = stamp_path(root, s);
  if (!fs::exists(p)) return std::nullopt;
  try {
    return detail::read_json(p);
  } catch (const Error&) {
    return std::nullopt;
  }
}

bool outputs_intact(const fs::path& root, const json& stamp) {
  for (const auto& f : stamp.at("outputs")) {
    const auto p = root / f.at("path").get<std::string>();
    if (!fs::exists(p) || sha256_file(p.string()) != f.at("sha256").get<std::string>()) return false;
  }
  return true;
}

std::string fingerprint(const detail::Context& ctx, Stage stage) {
  Sha256 h;
  auto feed = [&](const std::string& s) {
    h.update(s.data(), s.size());
    h.update("\n", 1);
  };
  feed(kVersion);
  feed(to_string(stage));
  feed(detail::stage_config_slice(ctx, stage).dump());
  for (Stage prev : all_stages()) {
    if (prev == stage) break;
    const auto st = read_stamp(ctx.root, prev);
    require(st.has_value(), ErrorKind::kData,
            "stage '" + to_string(stage) + "' needs the outputs of stage '" + to_string(prev) + "' in " +
                ctx.root.string() + "; run it first");
    for (const auto& f : st->at("outputs")) feed(f.at("path").get<std::string>() + " " + f.at("sha256").get<std::string>());
  }
  if (stage == Stage::kIngest && !ctx.cfg.synthetic) {
    const fs::path raw = ctx.cfg.raw_dir;
    for (const auto& f : list_files(raw, raw)) feed("raw/" + f.path + " " + f.sha256);
  }
  return h.hex();
}

void run_one(const detail::Context& ctx, Stage stage) {
  switch (stage) {
    case Stage::kGenerate: return detail::run_generate(ctx);
    case Stage::kIngest: return detail::run_ingest(ctx);
    case Stage::kMarts: return detail::run_marts(ctx);
    case Stage::kFeatures: return detail::run_features(ctx);
    case Stage::kTune: return detail::run_tune(ctx);
    case Stage::kTrain: return detail::run_train(ctx);
    case Stage::kEvaluate: return detail::run_evaluate(ctx);
    case Stage::kImportance: return detail::run_importance(ctx);
    case Stage::kReport: return detail::run_report(ctx);
  }
}

void write_manifest(const detail::Context& ctx, const RunSummary& summary) {
  json stages = json::array();
  for (Stage s : all_stages()) {
    json e = {{"stage", to_string(s)}};
    const auto it = std::find_if(summary.stages.begin(), summary.stages.end(),
                                 [&](const StageOutcome& o) { return o.stage == s; });
    if (it != summary.stages.end()) {
      e["status"] = it->skipped ? "up-to-date" : "ran";
      e["seconds"] = it->seconds;
    } else {
      e["status"] = read_stamp(ctx.root, s) ? "complete" : "not-run";
    }
    stages.push_back(e);
  }
  const json manifest = {{"format", "neurolos-run-manifest"},
                         {"version", kManifestVersion},
                         {"neurolos_version", kVersion},
                         {"config_sha256", sha256_hex(ctx.cfg.source.dump())},
                         {"seed", ctx.seed},
                         {"threads", ctx.threads},
                         {"stages", stages},
                         {"files", to_json(list_files(ctx.root, ctx.root, {"manifest.json"}))}};
  detail::write_json(ctx.root / "manifest.json", manifest);
}

}  // namespace

const std::vector<Stage>& all_stages() {
  static const std::vector<Stage> s = [] {
    std::vector<Stage> v;
    for (const auto& [stage, _] : stage_table()) v.push_back(stage);
    return v;
  }();
  return s;
}

std::string to_string(Stage stage) {
  for (const auto& [s, name] : stage_table()) {
    if (s == stage) return name;
  }
  fail(ErrorKind::kInternal, "unknown stage");
}

Stage stage_from_string(const std::string& name) {
  for (const auto& [s, n] : stage_table()) {
    if (name == n) return s;
  }
  fail(ErrorKind::kConfig, "unknown stage '" + name + "'");
}

std::vector<Stage> parse_stage_list(const std::string& text) {
  if (text == "all") return all_stages();
  std::set<Stage> chosen;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    auto item = text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    const auto first = item.find_first_not_of(" \t");
    item = first == std::string::npos ? "" : item.substr(first, item.find_last_not_of(" \t") - first + 1);
    require(!item.empty(), ErrorKind::kConfig, "empty entry in stage list '" + text + "'");
    chosen.insert(stage_from_string(item));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return {chosen.begin(), chosen.end()};
}

std::string resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& options) {
  if (!options.out.empty()) return options.out;
  if (const char* env = std::getenv("NEUROLOS_OUT"); env != nullptr && *env != '\0') return env;
  if (!cfg.output_dir.empty()) return cfg.output_dir;
  return "neurolos-out";
}

RunSummary run_stages(const ExperimentConfig& cfg, const std::vector<Stage>& stages, const RunOptions& options) {
  require(!stages.empty(), ErrorKind::kConfig, "no stages selected");
  detail::Context ctx{cfg, resolve_output_dir(cfg, options), options.seed.value_or(cfg.seed),
                      std::max(1, options.threads.value_or(cfg.threads)), options.emit_ddl};
  std::error_code ec;
  fs::create_directories(ctx.root, ec);
  require(!ec, ErrorKind::kIo, "cannot create output directory " + ctx.root.string() + ": " + ec.message());

  RunSummary summary;
  summary.out_dir = ctx.root.string();
  std::vector<Stage> ordered;
  for (Stage s : all_stages()) {
    if (std::find(stages.begin(), stages.end(), s) != stages.end()) ordered.push_back(s);
  }
  try {
    for (Stage s : ordered) {
      const auto t0 = std::chrono::steady_clock::now();
      const auto fp = fingerprint(ctx, s);
      const auto stamp = read_stamp(ctx.root, s);
      StageOutcome outcome{s, false, 0.0};
      if (stamp && stamp->value("fingerprint", "") == fp && outputs_intact(ctx.root, *stamp)) {
        outcome.skipped = true;
      } else {
        fs::remove(stamp_path(ctx.root, s));
        fs::remove_all(ctx.dir(s));
        run_one(ctx, s);
        detail::write_json(stamp_path(ctx.root, s), {{"stage", to_string(s)},
                                                     {"fingerprint", fp},
                                                     {"outputs", to_json(list_files(ctx.root, ctx.dir(s)))}});
      }
      outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      summary.stages.push_back(outcome);
    }
  } catch (...) {
    // Partial outputs stay in place; the manifest records how far the run got.
    try {
      write_manifest(ctx, summary);
    } catch (...) {
    }
    throw;
  }
  write_manifest(ctx, summary);
  return summary;
}

std::string sha256_hex(std::string_view bytes) {
  Sha256 h;
  h.update(bytes.data(), bytes.size());
  return h.hex();
}

std::string sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot read " + path);
  Sha256 h;
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) h.update(buf, static_cast<std::size_t>(in.gcount()));
  }
  return h.hex();
}

}  // namespace neurolos::pipeline
