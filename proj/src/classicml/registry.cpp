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
#include <set>

#include "config_json.hpp"
#include "neurolos/classicml.hpp"

namespace neurolos::ml {

namespace {

using nlohmann::json;

// Reads typed fields from a parameter object and rejects unknown keys.
class Params {
 public:
  Params(const json& j, std::string kind, std::set<std::string> allowed)
      : j_(j), kind_(std::move(kind)) {
    require(j.is_object(), ErrorKind::kConfig, kind_ + ": parameters must be an object");
    allowed.insert("seed");
    for (const auto& [key, _] : j.items()) {
      require(allowed.count(key) > 0, ErrorKind::kConfig,
              kind_ + "." + key + ": unknown parameter");
    }
  }

  double real(const std::string& key, double fallback) const {
    if (!j_.contains(key)) return fallback;
    const auto& v = j_.at(key);
    require(v.is_number(), ErrorKind::kConfig, kind_ + "." + key + ": expected a number");
    return v.get<double>();
  }

  std::size_t count(const std::string& key, std::size_t fallback) const {
    if (!j_.contains(key) || j_.at(key).is_null()) return fallback;
    const auto& v = j_.at(key);
    require(v.is_number_integer() && v.get<long long>() >= 0, ErrorKind::kConfig,
            kind_ + "." + key + ": expected a non-negative integer");
    return v.get<std::size_t>();
  }

  bool flag(const std::string& key, bool fallback) const {
    if (!j_.contains(key)) return fallback;
    require(j_.at(key).is_boolean(), ErrorKind::kConfig, kind_ + "." + key + ": expected true or false");
    return j_.at(key).get<bool>();
  }

  std::string choice(const std::string& key, const std::string& fallback,
                     const std::vector<std::string>& options) const {
    if (!j_.contains(key)) return fallback;
    const auto& v = j_.at(key);
    require(v.is_string(), ErrorKind::kConfig, kind_ + "." + key + ": expected a string");
    auto s = v.get<std::string>();
    if (std::find(options.begin(), options.end(), s) == options.end()) {
      std::string all;
      for (const auto& o : options) all += (all.empty() ? "" : ", ") + o;
      fail(ErrorKind::kConfig, kind_ + "." + key + ": '" + s + "' is not one of " + all);
    }
    return s;
  }

  // Re-raises validation failures with the model kind prefixed.
  template <typename Cfg>
  static Cfg checked(Cfg cfg, const std::string& kind) {
    try {
      cfg.validate();
    } catch (const Error& e) {
      fail(ErrorKind::kConfig, kind + "." + e.what());
    }
    return cfg;
  }

 private:
  const json& j_;
  std::string kind_;
};

const char* criterion_name(Criterion c) { return c == Criterion::kGini ? "gini" : "entropy"; }

const char* max_features_name(TreeConfig::MaxFeatures m) {
  switch (m) {
    case TreeConfig::MaxFeatures::kSqrt:
      return "sqrt";
    case TreeConfig::MaxFeatures::kLog2:
      return "log2";
    default:
      return "all";
  }
}

const std::set<std::string> kTreeKeys{"max_depth", "min_samples_split", "min_samples_leaf",
                                      "max_features", "criterion"};

TreeConfig read_tree(const Params& p, std::uint64_t seed) {
  TreeConfig c;
  c.max_depth = p.count("max_depth", 0);
  c.min_samples_split = p.count("min_samples_split", 2);
  c.min_samples_leaf = p.count("min_samples_leaf", 1);
  auto mf = p.choice("max_features", "all", {"all", "sqrt", "log2"});
  c.max_features = mf == "sqrt"   ? TreeConfig::MaxFeatures::kSqrt
                   : mf == "log2" ? TreeConfig::MaxFeatures::kLog2
                                  : TreeConfig::MaxFeatures::kAll;
  c.criterion = p.choice("criterion", "gini", {"gini", "entropy"}) == "gini" ? Criterion::kGini
                                                                             : Criterion::kEntropy;
  c.seed = seed;
  return c;
}

}  // namespace

namespace detail {

json to_params(const KnnConfig& c) {
  return {{"n_neighbors", c.k},
          {"weights", c.weighting == KnnConfig::Weighting::kUniform ? "uniform" : "distance"},
          {"metric", c.metric == KnnConfig::Metric::kEuclidean ? "euclidean" : "manhattan"}};
}

json to_params(const TreeConfig& c) {
  return {{"max_depth", c.max_depth},
          {"min_samples_split", c.min_samples_split},
          {"min_samples_leaf", c.min_samples_leaf},
          {"max_features", max_features_name(c.max_features)},
          {"criterion", criterion_name(c.criterion)},
          {"seed", c.seed}};
}

json to_params(const ForestConfig& c) {
  json j = to_params(c.tree);
  j["n_estimators"] = c.n_estimators;
  j["bootstrap"] = c.bootstrap;
  j["seed"] = c.seed;
  return j;
}

json to_params(const BoostConfig& c) {
  return {{"n_rounds", c.n_rounds},
          {"learning_rate", c.learning_rate},
          {"max_depth", c.max_depth},
          {"reg_lambda", c.reg_lambda},
          {"reg_alpha", c.reg_alpha},
          {"gamma", c.gamma},
          {"subsample", c.subsample},
          {"colsample_bytree", c.colsample_bytree},
          {"min_child_weight", c.min_child_weight},
          {"max_bins", c.max_bins},
          {"bagging_temperature", c.bagging_temperature},
          {"random_strength", c.random_strength},
          {"seed", c.seed}};
}

json to_params(const SvmConfig& c) {
  return {{"C", c.c}, {"kernel", "linear"}, {"epochs", c.epochs}, {"seed", c.seed}};
}

KnnConfig knn_config(const json& params) {
  Params p(params, "knn", {"n_neighbors", "weights", "metric"});
  KnnConfig c;
  c.k = p.count("n_neighbors", 5);
  c.weighting = p.choice("weights", "uniform", {"uniform", "distance"}) == "uniform"
                    ? KnnConfig::Weighting::kUniform
                    : KnnConfig::Weighting::kDistance;
  c.metric = p.choice("metric", "euclidean", {"euclidean", "manhattan"}) == "euclidean"
                 ? KnnConfig::Metric::kEuclidean
                 : KnnConfig::Metric::kManhattan;
  return Params::checked(c, "knn");
}

TreeConfig tree_config(const json& params, std::uint64_t seed) {
  Params p(params, "tree", kTreeKeys);
  return Params::checked(read_tree(p, seed), "tree");
}

ForestConfig forest_config(const json& params, std::uint64_t seed) {
  auto keys = kTreeKeys;
  keys.insert({"n_estimators", "bootstrap"});
  Params p(params, "forest", keys);
  ForestConfig c;
  c.tree = read_tree(p, seed);
  c.n_estimators = p.count("n_estimators", 100);
  c.bootstrap = p.flag("bootstrap", true);
  c.seed = seed;
  return Params::checked(c, "forest");
}

BoostConfig boost_config(const json& params, Growth growth, std::uint64_t seed) {
  const std::string kind = growth == Growth::kDepthwise ? "boost-depthwise" : "boost-oblivious";
  Params p(params, kind,
           {"n_rounds", "learning_rate", "max_depth", "reg_lambda", "reg_alpha", "gamma",
            "subsample", "colsample_bytree", "min_child_weight", "max_bins",
            "bagging_temperature", "random_strength"});
  BoostConfig c;
  c.growth = growth;
  c.n_rounds = p.count("n_rounds", c.n_rounds);
  c.learning_rate = p.real("learning_rate", c.learning_rate);
  c.max_depth = p.count("max_depth", c.max_depth);
  c.reg_lambda = p.real("reg_lambda", c.reg_lambda);
  c.reg_alpha = p.real("reg_alpha", c.reg_alpha);
  c.gamma = p.real("gamma", c.gamma);
  c.subsample = p.real("subsample", c.subsample);
  c.colsample_bytree = p.real("colsample_bytree", c.colsample_bytree);
  c.min_child_weight = p.real("min_child_weight", c.min_child_weight);
  c.max_bins = p.count("max_bins", c.max_bins);
  c.bagging_temperature = p.real("bagging_temperature", c.bagging_temperature);
  c.random_strength = p.real("random_strength", c.random_strength);
  c.seed = seed;
  return Params::checked(c, kind);
}

SvmConfig svm_config(const json& params, std::uint64_t seed) {
  Params p(params, "svm", {"C", "kernel", "epochs"});
  SvmConfig c;
  c.c = p.real("C", c.c);
  p.choice("kernel", "linear", {"linear"});
  c.epochs = p.count("epochs", c.epochs);
  c.seed = seed;
  return Params::checked(c, "svm");
}

json envelope(const std::string& kind, json config, json params) {
  return {{"format", kModelFormat},
          {"version", kModelFormatVersion},
          {"kind", kind},
          {"config", std::move(config)},
          {"params", std::move(params)}};
}

const json& check_envelope(const json& j, const std::string& kind) {
  require(j.is_object() && j.value("format", "") == kModelFormat, ErrorKind::kSchema,
          "not a model file");
  require(j.value("version", 0) == kModelFormatVersion, ErrorKind::kSchema,
          "unsupported model format version " + j.value("version", json(0)).dump());
  require(j.value("kind", "") == kind, ErrorKind::kSchema,
          "expected a '" + kind + "' model, found '" + j.value("kind", "") + "'");
  return j;
}

json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", m.data()}};
}

Matrix matrix_from_json(const json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  m.data() = j.at("data").get<std::vector<double>>();
  require(m.data().size() == m.rows() * m.cols(), ErrorKind::kSchema, "matrix size mismatch");
  return m;
}

}  // namespace detail

const std::vector<std::string>& classic_kinds() {
  static const std::vector<std::string> kinds{"knn", "svm", "forest", "boost-depthwise",
                                              "boost-oblivious"};
  return kinds;
}

bool is_classic_kind(const std::string& kind) {
  const auto& k = classic_kinds();
  return std::find(k.begin(), k.end(), kind) != k.end();
}

std::unique_ptr<Classifier> make_classifier(const std::string& kind, const json& params,
                                            std::uint64_t seed) {
  const json& p = params.is_null() ? json::object() : params;
  if (kind == "knn") return std::make_unique<KnnModel>(detail::knn_config(p));
  if (kind == "svm") return std::make_unique<SvmModel>(detail::svm_config(p, seed));
  if (kind == "forest") return std::make_unique<ForestModel>(detail::forest_config(p, seed));
  if (kind == "boost-depthwise")
    return std::make_unique<BoostModel>(detail::boost_config(p, Growth::kDepthwise, seed));
  if (kind == "boost-oblivious")
    return std::make_unique<BoostModel>(detail::boost_config(p, Growth::kOblivious, seed));
  fail(ErrorKind::kConfig, "unknown classic model kind '" + kind + "'");
}

ClassifierFactory classifier_factory(const std::string& kind, const json& params,
                                     std::uint64_t seed, int threads) {
  make_classifier(kind, params, seed);  // validate eagerly
  return [kind, params, seed, threads] {
    auto m = make_classifier(kind, params, seed);
    m->set_threads(threads);
    return m;
  };
}

std::unique_ptr<Classifier> model_from_json(const json& j) {
  require(j.is_object() && j.contains("kind"), ErrorKind::kSchema, "not a model file");
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "knn") return KnnModel::from_json(j);
  if (kind == "svm") return SvmModel::from_json(j);
  if (kind == "forest") return ForestModel::from_json(j);
  if (kind == "tree") return DecisionTree::from_json(j);
  if (kind == "boost-depthwise" || kind == "boost-oblivious") return BoostModel::from_json(j);
  fail(ErrorKind::kSchema, "unknown model kind '" + kind + "'");
}

void save_model(const Classifier& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write " + path);
  out << model.to_json().dump() << '\n';
  require(out.good(), ErrorKind::kIo, "failed writing " + path);
}

std::unique_ptr<Classifier> load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot read " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::kSchema, path + ": " + e.what());
  }
  return model_from_json(j);
}

}  // namespace neurolos::ml
