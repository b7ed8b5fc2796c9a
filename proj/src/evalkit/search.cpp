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
#include <numeric>
#include <sstream>

#include "neurolos/csv.hpp"
#include "neurolos/evalkit.hpp"

namespace neurolos::eval {

namespace {

using nlohmann::json;

ParamDomain int_range(std::string name, double lo, double hi) {
  return {std::move(name), ParamDomain::Kind::kInt, lo, hi, false, {}};
}
ParamDomain real_range(std::string name, double lo, double hi, bool log = false) {
  return {std::move(name), ParamDomain::Kind::kReal, lo, hi, log, {}};
}
ParamDomain categorical(std::string name, std::vector<json> choices) {
  return {std::move(name), ParamDomain::Kind::kCategorical, 0, 0, false, std::move(choices)};
}

}  // namespace

json ParamDomain::sample(Rng& rng) const {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  switch (kind) {
    case Kind::kCategorical: {
      std::uniform_int_distribution<std::size_t> pick(0, choices.size() - 1);
      return choices[pick(rng)];
    }
    case Kind::kInt: {
      if (log) {
        double v = std::exp(std::log(low) + u(rng) * (std::log(high + 1.0) - std::log(low)));
        return static_cast<long long>(std::clamp(std::floor(v), low, high));
      }
      std::uniform_int_distribution<long long> pick(static_cast<long long>(low), static_cast<long long>(high));
      return pick(rng);
    }
    case Kind::kReal:
      if (log) return std::exp(std::log(low) + u(rng) * (std::log(high) - std::log(low)));
      return low + u(rng) * (high - low);
  }
  return nullptr;
}

bool ParamDomain::contains(const json& v) const {
  switch (kind) {
    case Kind::kCategorical:
      return std::find(choices.begin(), choices.end(), v) != choices.end();
    case Kind::kInt:
      return v.is_number_integer() && v.get<double>() >= low && v.get<double>() <= high;
    case Kind::kReal:
      return v.is_number() && v.get<double>() >= low && v.get<double>() <= high;
  }
  return false;
}

SearchSpace SearchSpace::from_json(const json& j) {
  require(j.is_object(), ErrorKind::kConfig, "search space must be an object");
  SearchSpace s;
  for (const auto& [name, d] : j.items()) {
    const std::string where = "search." + name;
    require(d.is_object() && d.contains("type"), ErrorKind::kConfig, where + ": missing type");
    ParamDomain p;
    p.name = name;
    const auto type = d.at("type").get<std::string>();
    if (type == "categorical") {
      p.kind = ParamDomain::Kind::kCategorical;
      require(d.contains("choices") && d.at("choices").is_array() && !d.at("choices").empty(),
              ErrorKind::kConfig, where + ": categorical domain needs non-empty choices");
      for (const auto& c : d.at("choices")) p.choices.push_back(c);
    } else if (type == "int" || type == "real") {
      p.kind = type == "int" ? ParamDomain::Kind::kInt : ParamDomain::Kind::kReal;
      require(d.contains("low") && d.contains("high") && d.at("low").is_number() &&
                  d.at("high").is_number(),
              ErrorKind::kConfig, where + ": numeric domain needs low and high");
      p.low = d.at("low").get<double>();
      p.high = d.at("high").get<double>();
      p.log = d.value("log", false);
      require(p.low <= p.high, ErrorKind::kConfig, where + ": low must not exceed high");
      require(!p.log || p.low > 0.0, ErrorKind::kConfig, where + ": log domain needs low > 0");
      if (p.kind == ParamDomain::Kind::kInt) {
        require(p.low == std::floor(p.low) && p.high == std::floor(p.high), ErrorKind::kConfig,
                where + ": int bounds must be integers");
      }
    } else {
      fail(ErrorKind::kConfig, where + ": unknown type '" + type + "'");
    }
    s.params.push_back(std::move(p));
  }
  return s;
}

json SearchSpace::to_json() const {
  json j = json::object();
  for (const auto& p : params) {
    if (p.kind == ParamDomain::Kind::kCategorical) {
      j[p.name] = {{"type", "categorical"}, {"choices", p.choices}};
    } else {
      j[p.name] = {{"type", p.kind == ParamDomain::Kind::kInt ? "int" : "real"},
                   {"low", p.low}, {"high", p.high}, {"log", p.log}};
    }
  }
  return j;
}

json SearchSpace::sample(Rng& rng) const {
  json out = json::object();
  for (const auto& p : params) out[p.name] = p.sample(rng);
  return out;
}

bool SearchSpace::contains(const json& config) const {
  for (const auto& p : params) {
    if (!config.contains(p.name) || !p.contains(config.at(p.name))) return false;
  }
  return true;
}

const char* to_string(TrialStatus status) {
  switch (status) {
    case TrialStatus::kComplete:
      return "complete";
    case TrialStatus::kPruned:
      return "pruned";
    case TrialStatus::kFailed:
      return "failed";
  }
  return "?";
}

SearchResult random_search(const SearchSpace& space, const Objective& objective, std::size_t budget,
                           std::uint64_t seed, const PruningConfig& pruning, int threads) {
  require(budget >= 1, ErrorKind::kValidation, "search budget must be >= 1");
  if (pruning.enabled) {
    require(pruning.keep_fraction > 0.0 && pruning.keep_fraction < 1.0, ErrorKind::kConfig,
            "pruning.keep_fraction must lie in (0, 1)");
    for (std::size_t i = 0; i < pruning.rungs.size(); ++i) {
      require(pruning.rungs[i] > 0.0 && pruning.rungs[i] < 1.0 &&
                  (i == 0 || pruning.rungs[i] > pruning.rungs[i - 1]),
              ErrorKind::kConfig, "pruning.rungs must ascend within (0, 1)");
    }
  }
  SearchResult res;
  Rng rng = make_rng(seed, 0x5ea7c4);
  for (std::size_t i = 0; i < budget; ++i) {
    Trial t;
    t.id = i;
    t.params = space.sample(rng);
    res.trials.push_back(std::move(t));
  }

  std::vector<double> resources;
  if (pruning.enabled) resources = pruning.rungs;
  resources.push_back(1.0);

  std::vector<std::size_t> alive(budget);
  std::iota(alive.begin(), alive.end(), 0);
  for (std::size_t rung = 0; rung < resources.size() && !alive.empty(); ++rung) {
    const bool final = rung + 1 == resources.size();
    std::vector<double> scores(alive.size(), std::numeric_limits<double>::quiet_NaN());
    parallel_for(alive.size(), threads, [&](std::size_t i) {
      auto& t = res.trials[alive[i]];
      try {
        double s = objective(t.params, resources[rung]);
        if (!std::isfinite(s)) fail(ErrorKind::kTraining, "objective returned a non-finite value");
        scores[i] = s;
      } catch (const std::exception& e) {
        t.status = TrialStatus::kFailed;
        t.error = e.what();
      }
    });
    std::vector<std::size_t> ok;
    for (std::size_t i = 0; i < alive.size(); ++i) {
      auto& t = res.trials[alive[i]];
      if (t.status == TrialStatus::kFailed) continue;
      if (final) {
        t.score = scores[i];
      } else {
        t.rung_scores.push_back(scores[i]);
      }
      ok.push_back(i);
    }
    if (final) break;
    // Keep the best keep_fraction by this rung's score; ties favour lower ids.
    std::stable_sort(ok.begin(), ok.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
    const auto keep = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(pruning.keep_fraction * static_cast<double>(ok.size()))));
    std::vector<std::size_t> next;
    for (std::size_t r = 0; r < ok.size(); ++r) {
      if (r < keep) {
        next.push_back(alive[ok[r]]);
      } else {
        res.trials[alive[ok[r]]].status = TrialStatus::kPruned;
      }
    }
    std::sort(next.begin(), next.end());
    alive = std::move(next);
  }

  bool found = false;
  for (std::size_t i = 0; i < res.trials.size(); ++i) {
    const auto& t = res.trials[i];
    if (t.status != TrialStatus::kComplete) continue;
    if (!found || t.score > res.trials[res.best].score) {
      res.best = i;
      found = true;
    }
  }
  if (!found) {
    std::string why = res.trials.front().error.empty() ? "no trial completed" : res.trials.front().error;
    fail(ErrorKind::kTraining, "every search trial failed; first error: " + why);
  }
  return res;
}

std::string trial_log_csv(const SearchResult& result, const SearchSpace& space,
                          const PruningConfig& pruning) {
  std::ostringstream ss;
  std::vector<std::string> header{"trial_id"};
  for (const auto& p : space.params) header.push_back("param_" + p.name);
  const std::size_t n_rungs = pruning.enabled ? pruning.rungs.size() : 0;
  for (std::size_t r = 0; r < n_rungs; ++r) header.push_back("rung_" + std::to_string(r) + "_score");
  header.insert(header.end(), {"score", "status"});
  csv::write_row(ss, header);
  for (const auto& t : result.trials) {
    std::vector<std::string> row{std::to_string(t.id)};
    for (const auto& p : space.params) {
      const auto& v = t.params.at(p.name);
      row.push_back(v.is_string() ? v.get<std::string>()
                    : v.is_number_float() ? format_double(v.get<double>())
                                          : v.dump());
    }
    for (std::size_t r = 0; r < n_rungs; ++r) {
      row.push_back(r < t.rung_scores.size() ? format_double(t.rung_scores[r]) : "");
    }
    row.push_back(std::isfinite(t.score) ? format_double(t.score) : "");
    row.push_back(to_string(t.status));
    csv::write_row(ss, row);
  }
  return ss.str();
}

SearchSpace default_search_space(const std::string& kind) {
  SearchSpace s;
  if (kind == "knn") {
    s.params = {int_range("n_neighbors", 1, 50), categorical("weights", {"uniform", "distance"}),
                categorical("metric", {"euclidean", "manhattan"})};
  } else if (kind == "svm") {
    s.params = {real_range("C", 1e-3, 1e3, true)};
  } else if (kind == "forest") {
    s.params = {int_range("n_estimators", 10, 2000), int_range("max_depth", 3, 50),
                int_range("min_samples_split", 2, 20), int_range("min_samples_leaf", 1, 10),
                categorical("max_features", {"sqrt", "log2", "all"})};
  } else if (kind == "boost-depthwise") {
    s.params = {int_range("n_rounds", 10, 2000),         int_range("max_depth", 3, 50),
                real_range("learning_rate", 1e-5, 0.3, true), real_range("subsample", 0.3, 1.0),
                real_range("colsample_bytree", 0.5, 1.0), real_range("gamma", 0.0, 5.0),
                real_range("reg_alpha", 0.0, 20.0),      real_range("reg_lambda", 0.0, 20.0),
                real_range("min_child_weight", 1.0, 10.0)};
  } else if (kind == "boost-oblivious") {
    // Oblivious depth is capped at [3, 10]; 2^50 leaves are not representable.
    s.params = {int_range("n_rounds", 10, 2000),        int_range("max_depth", 3, 10),
                real_range("learning_rate", 1e-5, 0.3, true), real_range("reg_lambda", 1.0, 10.0),
                int_range("max_bins", 32, 255),         real_range("bagging_temperature", 0.0, 1.0),
                real_range("random_strength", 0.0, 10.0)};
  } else {
    fail(ErrorKind::kConfig, "no default search space for '" + kind + "'");
  }
  std::sort(s.params.begin(), s.params.end(), [](auto& a, auto& b) { return a.name < b.name; });
  return s;
}

}  // namespace neurolos::eval
