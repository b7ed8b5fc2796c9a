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
#include <limits>

#include "config_json.hpp"
#include "neurolos/classicml.hpp"

namespace neurolos::ml {

namespace {

double soft_threshold(double g, double alpha) {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

// Histogram view of the training matrix: codes[f][r] = number of edges < x.
struct Binned {
  std::vector<std::vector<double>> edges;
  std::vector<std::vector<std::uint8_t>> codes;
  std::size_t n_bins(std::size_t f) const { return edges[f].size() + 1; }
};

Binned make_bins(const Matrix& x, std::size_t max_bins) {
  Binned b;
  b.edges.resize(x.cols());
  b.codes.resize(x.cols());
  std::vector<double> col(x.rows());
  for (std::size_t f = 0; f < x.cols(); ++f) {
    for (std::size_t r = 0; r < x.rows(); ++r) col[r] = x(r, f);
    std::vector<double> u = col;
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    auto& edges = b.edges[f];
    auto mid = [&](std::size_t i) {
      double m = u[i - 1] + (u[i] - u[i - 1]) / 2.0;
      return m < u[i] ? m : u[i - 1];
    };
    if (u.size() <= max_bins) {
      for (std::size_t i = 1; i < u.size(); ++i) edges.push_back(mid(i));
    } else {
      for (std::size_t k = 1; k < max_bins; ++k) {
        std::size_t i = k * u.size() / max_bins;
        if (i >= 1 && (edges.empty() || mid(i) > edges.back())) edges.push_back(mid(i));
      }
    }
    auto& codes = b.codes[f];
    codes.resize(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      codes[r] = static_cast<std::uint8_t>(std::lower_bound(edges.begin(), edges.end(), col[r]) - edges.begin());
    }
  }
  return b;
}

struct Candidate {
  int feature = -1;
  std::size_t bin = 0;  // bins <= bin go left
  double gain = 0.0;
  double score = -std::numeric_limits<double>::infinity();  // gain plus selection noise
};

class TreeBuilder {
 public:
  TreeBuilder(const Binned& bins, std::span<const double> g, std::span<const double> h,
              std::vector<std::size_t> features, const BoostConfig& cfg, Rng rng, double noise_sd,
              std::vector<double>& gain_acc)
      : bins_(bins), g_(g), h_(h), features_(std::move(features)), cfg_(cfg), rng_(rng),
        noise_sd_(noise_sd), gain_acc_(gain_acc) {}

  RegressionTree build(const std::vector<std::size_t>& rows) {
    RegressionTree tree;
    if (cfg_.growth == Growth::kDepthwise) {
      tree.nodes.emplace_back();
      grow_depthwise(tree, 0, rows, 0);
    } else {
      grow_oblivious(tree, rows);
    }
    return tree;
  }

 private:
  double node_gain(double gl, double hl, double gr, double hr) const {
    return node_gain(gl, hl, gr, hr, leaf_score(gl + gr, hl + hr, cfg_.reg_lambda, cfg_.reg_alpha));
  }

  double node_gain(double gl, double hl, double gr, double hr, double parent_score) const {
    const double l = cfg_.reg_lambda, a = cfg_.reg_alpha;
    return 0.5 * (leaf_score(gl, hl, l, a) + leaf_score(gr, hr, l, a) - parent_score) - cfg_.gamma;
  }

  bool children_ok(double hl, double hr) const {
    return hl >= cfg_.min_child_weight && hr >= cfg_.min_child_weight && hl > 0.0 && hr > 0.0;
  }

  double noise() {
    if (noise_sd_ <= 0.0) return 0.0;
    return noise_sd_ * gauss_(rng_);
  }

  double leaf_value(double G, double H) const {
    return cfg_.learning_rate * leaf_weight(G, H, cfg_.reg_lambda, cfg_.reg_alpha);
  }

  void grow_depthwise(RegressionTree& tree, int node, const std::vector<std::size_t>& rows,
                      std::size_t depth) {
    double G = 0.0, H = 0.0;
    for (auto r : rows) {
      G += g_[r];
      H += h_[r];
    }
    tree.nodes[node].value = leaf_value(G, H);
    if (depth >= cfg_.max_depth || rows.size() < 2) return;

    Candidate best;
    std::vector<double> hg, hh;
    for (auto f : features_) {
      const std::size_t nb = bins_.n_bins(f);
      if (nb < 2) continue;
      hg.assign(nb, 0.0);
      hh.assign(nb, 0.0);
      const auto& codes = bins_.codes[f];
      for (auto r : rows) {
        hg[codes[r]] += g_[r];
        hh[codes[r]] += h_[r];
      }
      double gl = 0.0, hl = 0.0;
      for (std::size_t b = 0; b + 1 < nb; ++b) {
        gl += hg[b];
        hl += hh[b];
        const double hr = H - hl;
        if (!children_ok(hl, hr)) continue;
        const double gain = node_gain(gl, hl, G - gl, hr);
        if (!(gain > 0.0)) continue;
        const double score = gain + noise();
        if (score > best.score) best = {static_cast<int>(f), b, gain, score};
      }
    }
    if (best.feature < 0) return;

    gain_acc_[best.feature] += best.gain;
    std::vector<std::size_t> left, right;
    const auto& codes = bins_.codes[best.feature];
    for (auto r : rows) (codes[r] <= best.bin ? left : right).push_back(r);
    const int li = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    auto& n = tree.nodes[node];
    n.feature = best.feature;
    n.threshold = bins_.edges[best.feature][best.bin];
    n.left = li;
    n.right = li + 1;
    grow_depthwise(tree, li, left, depth + 1);
    grow_depthwise(tree, li + 1, right, depth + 1);
  }

  // Every level shares one (feature, bin); its gain is the sum of per-node
  // gains, and nodes whose children fail min_child_weight contribute nothing.
  void grow_oblivious(RegressionTree& tree, const std::vector<std::size_t>& rows) {
    std::vector<std::uint32_t> leaf(g_.size(), 0);
    std::vector<std::pair<int, std::size_t>> levels;
    std::size_t n_leaves = 1;
    std::vector<double> hg, hh, tg, th, ts;
    for (std::size_t depth = 0; depth < cfg_.max_depth; ++depth) {
      tg.assign(n_leaves, 0.0);
      th.assign(n_leaves, 0.0);
      for (auto r : rows) {
        tg[leaf[r]] += g_[r];
        th[leaf[r]] += h_[r];
      }
      ts.resize(n_leaves);
      for (std::size_t l = 0; l < n_leaves; ++l) ts[l] = leaf_score(tg[l], th[l], cfg_.reg_lambda, cfg_.reg_alpha);
      Candidate best;
      for (auto f : features_) {
        const std::size_t nb = bins_.n_bins(f);
        if (nb < 2) continue;
        hg.assign(n_leaves * nb, 0.0);
        hh.assign(n_leaves * nb, 0.0);
        const auto& codes = bins_.codes[f];
        for (auto r : rows) {
          hg[leaf[r] * nb + codes[r]] += g_[r];
          hh[leaf[r] * nb + codes[r]] += h_[r];
        }
        // Convert to per-leaf prefix sums.
        for (std::size_t l = 0; l < n_leaves; ++l) {
          for (std::size_t b = 1; b < nb; ++b) {
            hg[l * nb + b] += hg[l * nb + b - 1];
            hh[l * nb + b] += hh[l * nb + b - 1];
          }
        }
        for (std::size_t b = 0; b + 1 < nb; ++b) {
          double gain = 0.0;
          for (std::size_t l = 0; l < n_leaves; ++l) {
            const double gl = hg[l * nb + b], hl = hh[l * nb + b];
            const double hr = th[l] - hl;
            if (!children_ok(hl, hr)) continue;
            gain += node_gain(gl, hl, tg[l] - gl, hr, ts[l]);
          }
          if (!(gain > 0.0)) continue;
          const double score = gain + noise();
          if (score > best.score) best = {static_cast<int>(f), b, gain, score};
        }
      }
      if (best.feature < 0) break;
      gain_acc_[best.feature] += best.gain;
      levels.emplace_back(best.feature, best.bin);
      const auto& codes = bins_.codes[best.feature];
      for (auto r : rows) leaf[r] = 2 * leaf[r] + (codes[r] <= best.bin ? 0u : 1u);
      n_leaves *= 2;
    }

    std::vector<double> lg(n_leaves, 0.0), lh(n_leaves, 0.0);
    for (auto r : rows) {
      lg[leaf[r]] += g_[r];
      lh[leaf[r]] += h_[r];
    }
    // Heap layout: node k has children 2k+1 and 2k+2; leaves fill the last level.
    const std::size_t n_internal = n_leaves - 1;
    tree.nodes.assign(n_internal + n_leaves, {});
    for (std::size_t k = 0; k < n_internal; ++k) {
      std::size_t level = static_cast<std::size_t>(std::log2(static_cast<double>(k + 1)));
      auto [f, b] = levels[level];
      tree.nodes[k] = {f, bins_.edges[f][b], static_cast<int>(2 * k + 1), static_cast<int>(2 * k + 2), 0.0};
    }
    for (std::size_t l = 0; l < n_leaves; ++l) {
      tree.nodes[n_internal + l].value = leaf_value(lg[l], lh[l]);
    }
  }

  const Binned& bins_;
  std::span<const double> g_, h_;
  std::vector<std::size_t> features_;
  const BoostConfig& cfg_;
  Rng rng_;
  std::normal_distribution<double> gauss_;
  double noise_sd_;
  std::vector<double>& gain_acc_;
};

std::array<double, kNumClasses> softmax(std::span<const double> f) {
  std::array<double, kNumClasses> p;
  const double m = *std::max_element(f.begin(), f.end());
  double z = 0.0;
  for (int k = 0; k < kNumClasses; ++k) z += (p[k] = std::exp(f[k] - m));
  for (auto& v : p) v /= z;
  return p;
}

}  // namespace

double leaf_weight(double grad_sum, double hess_sum, double lambda, double alpha) {
  const double denom = hess_sum + lambda;
  if (!(denom > 0.0)) return 0.0;
  return -soft_threshold(grad_sum, alpha) / denom;
}

double leaf_score(double grad_sum, double hess_sum, double lambda, double alpha) {
  const double denom = hess_sum + lambda;
  if (!(denom > 0.0)) return 0.0;
  const double t = soft_threshold(grad_sum, alpha);
  return t * t / denom;
}

double RegressionTree::eval(std::span<const double> row) const {
  std::size_t i = 0;
  while (nodes[i].feature >= 0) {
    i = static_cast<std::size_t>(row[nodes[i].feature] <= nodes[i].threshold ? nodes[i].left : nodes[i].right);
  }
  return nodes[i].value;
}

std::size_t RegressionTree::depth() const {
  std::size_t best = 0;
  std::vector<std::pair<int, std::size_t>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (nodes[i].feature >= 0) {
      stack.push_back({nodes[i].left, d + 1});
      stack.push_back({nodes[i].right, d + 1});
    }
  }
  return best;
}

void BoostConfig::validate() const {
  require(n_rounds >= 1, ErrorKind::kConfig, "n_rounds must be >= 1");
  require(learning_rate >= 0.0 && learning_rate <= 1.0, ErrorKind::kConfig,
          "learning_rate must lie in [0, 1]");
  require(max_depth >= 1, ErrorKind::kConfig, "max_depth must be >= 1");
  require(growth != Growth::kOblivious || max_depth <= kMaxObliviousDepth, ErrorKind::kConfig,
          "max_depth for oblivious trees must be <= " + std::to_string(kMaxObliviousDepth));
  require(reg_lambda >= 0.0, ErrorKind::kConfig, "reg_lambda must be >= 0");
  require(reg_alpha >= 0.0, ErrorKind::kConfig, "reg_alpha must be >= 0");
  require(gamma >= 0.0, ErrorKind::kConfig, "gamma must be >= 0");
  require(subsample > 0.0 && subsample <= 1.0, ErrorKind::kConfig, "subsample must lie in (0, 1]");
  require(colsample_bytree > 0.0 && colsample_bytree <= 1.0, ErrorKind::kConfig,
          "colsample_bytree must lie in (0, 1]");
  require(min_child_weight >= 0.0, ErrorKind::kConfig, "min_child_weight must be >= 0");
  require(max_bins >= 2 && max_bins <= 256, ErrorKind::kConfig, "max_bins must lie in [2, 256]");
  require(bagging_temperature >= 0.0, ErrorKind::kConfig, "bagging_temperature must be >= 0");
  require(random_strength >= 0.0, ErrorKind::kConfig, "random_strength must be >= 0");
}

BoostModel::BoostModel(BoostConfig cfg) : cfg_(cfg) { cfg_.validate(); }

std::string BoostModel::kind() const {
  return cfg_.growth == Growth::kDepthwise ? "boost-depthwise" : "boost-oblivious";
}

void BoostModel::fit(const Dataset& train) {
  train.validate();
  require(train.rows() > 0, ErrorKind::kData, "cannot fit boosting on zero rows");
  const std::size_t n = train.rows(), p = train.cols();
  const Binned bins = make_bins(train.x, cfg_.max_bins);

  auto counts = train.class_counts();
  for (int k = 0; k < kNumClasses; ++k) {
    // Absent classes get a tiny prior instead of log(0).
    const double prior = std::max(static_cast<double>(counts[k]), 1e-3) / static_cast<double>(n);
    base_[k] = std::log(prior);
  }
  trees_.clear();
  train_loss_.clear();
  gain_.assign(p, 0.0);

  Matrix f(n, kNumClasses);
  for (std::size_t r = 0; r < n; ++r)
    for (int k = 0; k < kNumClasses; ++k) f(r, k) = base_[k];

  std::vector<std::array<double, kNumClasses>> prob(n);
  auto refresh = [&] {
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      prob[r] = softmax(f.row(r));
      loss -= std::log(std::max(prob[r][train.y[r]], 1e-300));
    }
    return loss / static_cast<double>(n);
  };
  refresh();

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  const std::size_t n_cols = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(cfg_.colsample_bytree * static_cast<double>(p))));

  std::array<std::vector<double>, kNumClasses> g, h;
  for (auto& v : g) v.assign(n, 0.0);
  for (auto& v : h) v.assign(n, 0.0);
  std::vector<double> weight(n, 1.0);

  for (std::size_t round = 0; round < cfg_.n_rounds; ++round) {
    const std::uint64_t round_seed = derive_seed(cfg_.seed, round);
    Rng rng = make_rng(round_seed, 0);
    std::vector<std::size_t> rows = all;
    if (cfg_.subsample < 1.0) {
      std::shuffle(rows.begin(), rows.end(), rng);
      const auto m = std::max<std::size_t>(
          1, static_cast<std::size_t>(std::llround(cfg_.subsample * static_cast<double>(n))));
      rows.resize(m);
      std::sort(rows.begin(), rows.end());
    }
    if (cfg_.bagging_temperature > 0.0) {
      // Gamma(1/T, T) has mean 1 and variance T; rescaled to mean exactly 1.
      std::gamma_distribution<double> gd(1.0 / cfg_.bagging_temperature, cfg_.bagging_temperature);
      double total = 0.0;
      for (auto r : rows) total += (weight[r] = gd(rng));
      const double scale = static_cast<double>(rows.size()) / total;
      for (auto r : rows) weight[r] *= scale;
    }
    for (auto r : rows) {
      for (int k = 0; k < kNumClasses; ++k) {
        const double pk = prob[r][k];
        const double yk = train.y[r] == k ? 1.0 : 0.0;
        g[k][r] = weight[r] * (pk - yk);
        h[k][r] = weight[r] * std::max(pk * (1.0 - pk), 1e-16);
      }
    }

    std::array<RegressionTree, kNumClasses> round_trees;
    std::array<std::vector<double>, kNumClasses> round_gain;
    parallel_for(kNumClasses, threads_, [&](std::size_t k) {
      Rng tree_rng = make_rng(round_seed, k + 1);
      std::vector<std::size_t> feats(p);
      std::iota(feats.begin(), feats.end(), 0);
      if (n_cols < p) {
        std::shuffle(feats.begin(), feats.end(), tree_rng);
        feats.resize(n_cols);
        std::sort(feats.begin(), feats.end());
      }
      double noise_sd = 0.0;
      if (cfg_.random_strength > 0.0) {
        double sq = 0.0;
        for (auto r : rows) sq += g[k][r] * g[k][r];
        noise_sd = cfg_.random_strength * std::sqrt(sq / static_cast<double>(rows.size()));
      }
      round_gain[k].assign(p, 0.0);
      TreeBuilder builder(bins, g[k], h[k], std::move(feats), cfg_, tree_rng, noise_sd, round_gain[k]);
      round_trees[k] = builder.build(rows);
    });
    for (int k = 0; k < kNumClasses; ++k) {
      for (std::size_t j = 0; j < p; ++j) gain_[j] += round_gain[k][j];
    }
    for (std::size_t r = 0; r < n; ++r) {
      for (int k = 0; k < kNumClasses; ++k) f(r, k) += round_trees[k].eval(train.x.row(r));
    }
    trees_.push_back(std::move(round_trees));
    const double loss = refresh();
    require(std::isfinite(loss), ErrorKind::kTraining,
            "boosting loss became non-finite at round " + std::to_string(round));
    train_loss_.push_back(loss);
  }
  fitted_ = true;
}

Matrix BoostModel::raw_scores(const Matrix& x) const {
  require(fitted_, ErrorKind::kValidation, "boosting model is not fitted");
  require(x.cols() == gain_.size(), ErrorKind::kValidation, "boosting feature count mismatch");
  Matrix f(x.rows(), kNumClasses);
  parallel_for(x.rows(), threads_, [&](std::size_t r) {
    auto row = x.row(r);
    for (int k = 0; k < kNumClasses; ++k) {
      double s = base_[k];
      for (const auto& round : trees_) s += round[k].eval(row);
      f(r, k) = s;
    }
  });
  return f;
}

Matrix BoostModel::predict_proba(const Matrix& x) const {
  Matrix f = raw_scores(x);
  for (std::size_t r = 0; r < f.rows(); ++r) {
    auto p = softmax(f.row(r));
    for (int k = 0; k < kNumClasses; ++k) f(r, k) = p[k];
  }
  return f;
}

std::vector<int> BoostModel::predict(const Matrix& x) const {
  Matrix f = raw_scores(x);
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) out[r] = argmax(f.row(r));
  return out;
}

std::optional<std::vector<double>> BoostModel::feature_importance() const {
  require(fitted_, ErrorKind::kValidation, "boosting model is not fitted");
  std::vector<double> v = gain_;
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  if (s > 0.0) {
    for (auto& e : v) e /= s;
  }
  return v;
}

nlohmann::json BoostModel::to_json() const {
  nlohmann::json rounds = nlohmann::json::array();
  for (const auto& round : trees_) {
    nlohmann::json per_class = nlohmann::json::array();
    for (const auto& t : round) {
      nlohmann::json f = nlohmann::json::array(), th = nlohmann::json::array(),
                     l = nlohmann::json::array(), r = nlohmann::json::array(),
                     v = nlohmann::json::array();
      for (const auto& n : t.nodes) {
        f.push_back(n.feature);
        th.push_back(n.threshold);
        l.push_back(n.left);
        r.push_back(n.right);
        v.push_back(n.value);
      }
      per_class.push_back({{"feature", f}, {"threshold", th}, {"left", l}, {"right", r}, {"value", v}});
    }
    rounds.push_back(per_class);
  }
  return detail::envelope(kind(), detail::to_params(cfg_),
                          {{"base_score", base_}, {"gain", gain_}, {"train_loss", train_loss_},
                           {"trees", rounds}});
}

std::unique_ptr<BoostModel> BoostModel::from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  require(kind == "boost-depthwise" || kind == "boost-oblivious", ErrorKind::kSchema,
          "not a boosting model: " + kind);
  const auto& env = detail::check_envelope(j, kind);
  const auto& cfg = env.at("config");
  auto m = std::make_unique<BoostModel>(detail::boost_config(
      cfg, kind == "boost-depthwise" ? Growth::kDepthwise : Growth::kOblivious, cfg.value("seed", 0ULL)));
  const auto& p = env.at("params");
  m->base_ = p.at("base_score").get<std::array<double, kNumClasses>>();
  m->gain_ = p.at("gain").get<std::vector<double>>();
  m->train_loss_ = p.at("train_loss").get<std::vector<double>>();
  for (const auto& round : p.at("trees")) {
    std::array<RegressionTree, kNumClasses> trees;
    for (int k = 0; k < kNumClasses; ++k) {
      const auto& t = round.at(k);
      auto& nodes = trees[k].nodes;
      nodes.resize(t.at("feature").size());
      for (std::size_t i = 0; i < nodes.size(); ++i) {
        nodes[i] = {t.at("feature")[i].get<int>(), t.at("threshold")[i].get<double>(),
                    t.at("left")[i].get<int>(), t.at("right")[i].get<int>(), t.at("value")[i].get<double>()};
      }
    }
    m->trees_.push_back(std::move(trees));
  }
  m->fitted_ = true;
  return m;
}

}  // namespace neurolos::ml
