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

#include "config_json.hpp"
#include "neurolos/classicml.hpp"

namespace neurolos::ml {

namespace {

using Counts = std::array<double, kNumClasses>;

double counts_impurity(const Counts& c, double n, Criterion criterion) {
  if (n <= 0.0) return 0.0;
  Counts p;
  for (int k = 0; k < kNumClasses; ++k) p[k] = c[k] / n;
  return impurity(p, criterion);
}

int counts_argmax(const Counts& c) { return argmax(c); }

}  // namespace

double impurity(std::span<const double> probs, Criterion criterion) {
  double out = 0.0;
  if (criterion == Criterion::kGini) {
    double sq = 0.0;
    for (double p : probs) sq += p * p;
    out = 1.0 - sq;
  } else {
    for (double p : probs) {
      if (p > 0.0) out -= p * std::log2(p);
    }
  }
  return std::max(0.0, out);
}

void TreeConfig::validate() const {
  require(min_samples_split >= 2, ErrorKind::kConfig, "min_samples_split must be >= 2");
  require(min_samples_leaf >= 1, ErrorKind::kConfig, "min_samples_leaf must be >= 1");
}

std::size_t TreeConfig::features_per_split(std::size_t n) const {
  switch (max_features) {
    case MaxFeatures::kAll:
      return n;
    case MaxFeatures::kSqrt:
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(n))));
    case MaxFeatures::kLog2:
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::log2(static_cast<double>(n))));
  }
  return n;
}

SplitChoice best_split(const Matrix& x, std::span<const int> y, std::span<const std::size_t> rows,
                       std::span<const std::size_t> features, Criterion criterion,
                       std::size_t min_samples_leaf) {
  SplitChoice best;
  const double n = static_cast<double>(rows.size());
  Counts total{};
  for (auto r : rows) total[y[r]] += 1.0;
  const double parent = counts_impurity(total, n, criterion);
  if (parent <= 0.0) return best;

  std::vector<std::pair<double, int>> col(rows.size());
  for (auto f : features) {
    for (std::size_t i = 0; i < rows.size(); ++i) col[i] = {x(rows[i], f), y[rows[i]]};
    std::sort(col.begin(), col.end());
    Counts left{};
    for (std::size_t i = 0; i + 1 < col.size(); ++i) {
      left[col[i].second] += 1.0;
      if (col[i].first == col[i + 1].first) continue;
      const std::size_t nl = i + 1, nr = col.size() - nl;
      if (nl < min_samples_leaf || nr < min_samples_leaf) continue;
      Counts right;
      for (int k = 0; k < kNumClasses; ++k) right[k] = total[k] - left[k];
      const double dl = static_cast<double>(nl), dr = static_cast<double>(nr);
      const double gain = parent - dl / n * counts_impurity(left, dl, criterion) -
                          dr / n * counts_impurity(right, dr, criterion);
      if (gain > best.gain) {
        double a = col[i].first, b = col[i + 1].first;
        double mid = a + (b - a) / 2.0;
        if (!(mid < b)) mid = a;
        best = {static_cast<int>(f), mid, gain};
      }
    }
  }
  return best;
}

DecisionTree::DecisionTree(TreeConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void DecisionTree::fit(const Dataset& train) {
  train.validate();
  require(train.rows() > 0, ErrorKind::kData, "cannot fit a tree on zero rows");
  std::vector<std::size_t> rows(train.rows());
  std::iota(rows.begin(), rows.end(), 0);
  Rng rng = make_rng(cfg_.seed, 0);
  fit_rows(train.x, train.y, std::move(rows), rng);
}

void DecisionTree::fit_rows(const Matrix& x, std::span<const int> y, std::vector<std::size_t> rows,
                            Rng& rng) {
  nodes_.clear();
  importance_.assign(x.cols(), 0.0);
  const double n_root = static_cast<double>(rows.size());
  const std::size_t n_try = cfg_.features_per_split(x.cols());
  std::vector<std::size_t> all(x.cols());
  std::iota(all.begin(), all.end(), 0);

  struct Work {
    int node;
    std::vector<std::size_t> rows;
    std::size_t depth;
  };
  std::vector<Work> stack;
  nodes_.emplace_back();
  stack.push_back({0, std::move(rows), 0});
  while (!stack.empty()) {
    Work w = std::move(stack.back());
    stack.pop_back();
    Counts counts{};
    for (auto r : w.rows) counts[y[r]] += 1.0;
    nodes_[w.node].counts = counts;
    const bool depth_ok = cfg_.max_depth == 0 || w.depth < cfg_.max_depth;
    if (!depth_ok || w.rows.size() < cfg_.min_samples_split) continue;

    std::vector<std::size_t> feats = all;
    if (n_try < feats.size()) {
      std::shuffle(feats.begin(), feats.end(), rng);
      feats.resize(n_try);
      std::sort(feats.begin(), feats.end());
    }
    auto split = best_split(x, y, w.rows, feats, cfg_.criterion, cfg_.min_samples_leaf);
    if (split.feature < 0) continue;

    importance_[split.feature] += static_cast<double>(w.rows.size()) / n_root * split.gain;
    std::vector<std::size_t> left, right;
    for (auto r : w.rows) (x(r, split.feature) <= split.threshold ? left : right).push_back(r);
    const int li = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    nodes_.emplace_back();
    auto& node = nodes_[w.node];
    node.feature = split.feature;
    node.threshold = split.threshold;
    node.left = li;
    node.right = li + 1;
    // Right first so the left subtree is numbered contiguously.
    stack.push_back({li + 1, std::move(right), w.depth + 1});
    stack.push_back({li, std::move(left), w.depth + 1});
  }
}

const TreeNode& DecisionTree::leaf_for(std::span<const double> row) const {
  require(fitted(), ErrorKind::kValidation, "tree is not fitted");
  const TreeNode* node = &nodes_[0];
  while (node->feature >= 0) {
    node = &nodes_[row[node->feature] <= node->threshold ? node->left : node->right];
  }
  return *node;
}

std::vector<int> DecisionTree::predict(const Matrix& x) const {
  require(fitted() && x.cols() == importance_.size(), ErrorKind::kValidation,
          "tree expects " + std::to_string(importance_.size()) + " features");
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = counts_argmax(leaf_for(x.row(r)).counts);
  return out;
}

Matrix DecisionTree::predict_proba(const Matrix& x) const {
  require(fitted() && x.cols() == importance_.size(), ErrorKind::kValidation,
          "tree expects " + std::to_string(importance_.size()) + " features");
  Matrix out(x.rows(), kNumClasses);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto& c = leaf_for(x.row(r)).counts;
    const double n = c[0] + c[1] + c[2];
    for (int k = 0; k < kNumClasses; ++k) out(r, k) = c[k] / n;
  }
  return out;
}

namespace {

std::optional<std::vector<double>> normalised(std::vector<double> v) {
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  if (s > 0.0) {
    for (auto& e : v) e /= s;
  }
  return v;
}

}  // namespace

std::optional<std::vector<double>> DecisionTree::feature_importance() const {
  require(fitted(), ErrorKind::kValidation, "tree is not fitted");
  return normalised(importance_);
}

std::size_t DecisionTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes_[i].feature >= 0) {
      stack.push_back({nodes_[i].left, d + 1});
      stack.push_back({nodes_[i].right, d + 1});
    }
  }
  return best;
}

namespace {

nlohmann::json nodes_to_json(const std::vector<TreeNode>& nodes) {
  // Columnar layout keeps forest files compact.
  nlohmann::json f = nlohmann::json::array(), t = nlohmann::json::array(),
                 l = nlohmann::json::array(), r = nlohmann::json::array(),
                 c = nlohmann::json::array();
  for (const auto& n : nodes) {
    f.push_back(n.feature);
    t.push_back(n.threshold);
    l.push_back(n.left);
    r.push_back(n.right);
    c.push_back(n.counts);
  }
  return {{"feature", f}, {"threshold", t}, {"left", l}, {"right", r}, {"counts", c}};
}

std::vector<TreeNode> nodes_from_json(const nlohmann::json& j) {
  std::vector<TreeNode> nodes(j.at("feature").size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    nodes[i].feature = j.at("feature")[i].get<int>();
    nodes[i].threshold = j.at("threshold")[i].get<double>();
    nodes[i].left = j.at("left")[i].get<int>();
    nodes[i].right = j.at("right")[i].get<int>();
    nodes[i].counts = j.at("counts")[i].get<Counts>();
  }
  return nodes;
}

}  // namespace

nlohmann::json DecisionTree::to_json() const {
  return detail::envelope("tree", detail::to_params(cfg_),
                          {{"nodes", nodes_to_json(nodes_)}, {"importance", importance_}});
}

std::unique_ptr<DecisionTree> DecisionTree::from_json(const nlohmann::json& j) {
  const auto& env = detail::check_envelope(j, "tree");
  auto m = std::make_unique<DecisionTree>(
      detail::tree_config(env.at("config"), env.at("config").value("seed", 0ULL)));
  m->nodes_ = nodes_from_json(env.at("params").at("nodes"));
  m->importance_ = env.at("params").at("importance").get<std::vector<double>>();
  return m;
}

// ---------------------------------------------------------------- forest

void ForestConfig::validate() const {
  require(n_estimators >= 1, ErrorKind::kConfig, "n_estimators must be >= 1");
  tree.validate();
}

ForestModel::ForestModel(ForestConfig cfg) : cfg_(cfg) { cfg_.validate(); }

void ForestModel::fit(const Dataset& train) {
  train.validate();
  require(train.rows() > 0, ErrorKind::kData, "cannot fit a forest on zero rows");
  n_features_ = train.cols();
  std::vector<DecisionTree> trees(cfg_.n_estimators, DecisionTree(cfg_.tree));
  const std::size_t n = train.rows();
  parallel_for(cfg_.n_estimators, threads_, [&](std::size_t b) {
    Rng rng = make_rng(cfg_.seed, b);
    std::vector<std::size_t> rows(n);
    if (cfg_.bootstrap) {
      std::uniform_int_distribution<std::size_t> pick(0, n - 1);
      for (auto& r : rows) r = pick(rng);
    } else {
      std::iota(rows.begin(), rows.end(), 0);
    }
    trees[b].fit_rows(train.x, train.y, std::move(rows), rng);
  });
  trees_ = std::move(trees);
}

Matrix ForestModel::predict_proba(const Matrix& x) const {
  require(fitted(), ErrorKind::kValidation, "forest is not fitted");
  require(x.cols() == n_features_, ErrorKind::kValidation,
          "forest expects " + std::to_string(n_features_) + " features");
  Matrix votes(x.rows(), kNumClasses);
  parallel_for(x.rows(), threads_, [&](std::size_t r) {
    for (const auto& t : trees_) votes(r, counts_argmax(t.leaf_for(x.row(r)).counts)) += 1.0;
    for (int k = 0; k < kNumClasses; ++k) votes(r, k) /= static_cast<double>(trees_.size());
  });
  return votes;
}

std::vector<int> ForestModel::predict(const Matrix& x) const {
  auto p = predict_proba(x);
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = argmax(p.row(r));
  return out;
}

std::optional<std::vector<double>> ForestModel::feature_importance() const {
  require(fitted(), ErrorKind::kValidation, "forest is not fitted");
  std::vector<double> total(n_features_, 0.0);
  for (const auto& t : trees_) {
    for (std::size_t j = 0; j < total.size(); ++j) total[j] += t.raw_importance()[j];
  }
  return normalised(std::move(total));
}

nlohmann::json ForestModel::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) {
    trees.push_back({{"nodes", nodes_to_json(t.nodes())}, {"importance", t.raw_importance()}});
  }
  return detail::envelope("forest", detail::to_params(cfg_),
                          {{"n_features", n_features_}, {"trees", trees}});
}

std::unique_ptr<ForestModel> ForestModel::from_json(const nlohmann::json& j) {
  const auto& env = detail::check_envelope(j, "forest");
  const auto& cfg = env.at("config");
  auto m = std::make_unique<ForestModel>(detail::forest_config(cfg, cfg.value("seed", 0ULL)));
  m->n_features_ = env.at("params").at("n_features").get<std::size_t>();
  for (const auto& tj : env.at("params").at("trees")) {
    auto wrapped = detail::envelope("tree", detail::to_params(m->cfg_.tree), tj);
    m->trees_.push_back(std::move(*DecisionTree::from_json(wrapped)));
  }
  return m;
}

}  // namespace neurolos::ml
