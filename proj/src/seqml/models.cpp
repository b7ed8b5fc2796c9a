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

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "neurolos/dataset.hpp"
#include "neurolos/seqml.hpp"

namespace neurolos::seq {

namespace {

using RMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using MapT = Eigen::Map<RMat>;
using CMapT = Eigen::Map<const RMat>;

constexpr const char* kSeqFormat = "neurolos-seqmodel";
constexpr int kSeqFormatVersion = 1;
constexpr double kLnEps = 1e-5;

CMapT view(const Tensor& t) { return CMapT(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)); }
MapT view(Tensor& t) { return MapT(t.data.data(), static_cast<Eigen::Index>(t.rows), static_cast<Eigen::Index>(t.cols)); }
CMapT view(const Matrix& m) { return CMapT(m.data().data(), static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(m.cols())); }

void init_uniform(Tensor& t, double bound, Rng& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (auto& v : t.data) v = u(rng);
}

std::array<double, kNumClasses> softmax3(const std::array<double, kNumClasses>& z) {
  std::array<double, kNumClasses> p;
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (int k = 0; k < kNumClasses; ++k) s += (p[k] = std::exp(z[k] - m));
  for (auto& v : p) v /= s;
  return p;
}

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

// ---------------------------------------------------------------- base

std::vector<Tensor> SequenceModel::zero_like() const {
  std::vector<Tensor> out;
  for (const auto& p : params_) out.emplace_back(p.name, p.rows, p.cols);
  return out;
}

std::size_t SequenceModel::n_parameters() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.data.size();
  return n;
}

void SequenceModel::fit_standardization(const WindowSet& train) {
  require(train.size() > 0, ErrorKind::kData, "cannot standardise an empty window set");
  require(train.channels() == channels_, ErrorKind::kValidation, "window channel count mismatch");
  mean_.assign(channels_, 0.0);
  scale_.assign(channels_, 1.0);
  std::vector<double> sq(channels_, 0.0);
  double n = 0.0;
  for (const auto& w : train.x) {
    for (std::size_t t = 0; t < w.rows(); ++t) {
      for (std::size_t c = 0; c < channels_; ++c) mean_[c] += w(t, c);
    }
    n += static_cast<double>(w.rows());
  }
  for (auto& m : mean_) m /= n;
  for (const auto& w : train.x) {
    for (std::size_t t = 0; t < w.rows(); ++t) {
      for (std::size_t c = 0; c < channels_; ++c) sq[c] += (w(t, c) - mean_[c]) * (w(t, c) - mean_[c]);
    }
  }
  for (std::size_t c = 0; c < channels_; ++c) {
    const double sd = std::sqrt(sq[c] / n);
    scale_[c] = sd > 1e-12 ? sd : 1.0;
  }
}

Matrix SequenceModel::standardize(const Matrix& window) const {
  Matrix out = window;
  if (mean_.empty()) return out;
  for (std::size_t t = 0; t < out.rows(); ++t) {
    for (std::size_t c = 0; c < channels_; ++c) out(t, c) = (out(t, c) - mean_[c]) / scale_[c];
  }
  return out;
}

Matrix SequenceModel::predict_proba(const WindowSet& set, int threads) const {
  require(set.channels() == channels_ || set.size() == 0, ErrorKind::kValidation,
          "window channel count mismatch");
  Matrix out(set.size(), kNumClasses);
  parallel_for(set.size(), threads, [&](std::size_t i) {
    auto p = softmax3(logits(standardize(set.x[i])));
    for (int k = 0; k < kNumClasses; ++k) out(i, k) = p[k];
  });
  return out;
}

std::vector<int> SequenceModel::predict(const WindowSet& set, int threads) const {
  auto p = predict_proba(set, threads);
  std::vector<int> out(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) out[i] = argmax(p.row(i));
  return out;
}

nlohmann::json SequenceModel::to_json() const {
  nlohmann::json tensors = nlohmann::json::array();
  for (const auto& p : params_) {
    tensors.push_back({{"name", p.name}, {"rows", p.rows}, {"cols", p.cols}, {"data", p.data}});
  }
  return {{"format", kSeqFormat},
          {"version", kSeqFormatVersion},
          {"kind", kind()},
          {"channels", channels_},
          {"config", config_json()},
          {"standardization", {{"mean", mean_}, {"scale", scale_}}},
          {"tensors", tensors}};
}

// ---------------------------------------------------------------- LSTM

void LstmConfig::validate() const {
  require(hidden >= 1, ErrorKind::kConfig, "lstm.hidden must be >= 1");
}

LstmModel::LstmModel(std::size_t channels, LstmConfig cfg) : SequenceModel(channels), cfg_(cfg) {
  cfg_.validate();
  require(channels >= 1, ErrorKind::kConfig, "lstm needs at least one input channel");
  const std::size_t h = cfg_.hidden, z = channels + h;
  Rng rng = make_rng(cfg_.seed, 0x15);
  const double bound = 1.0 / std::sqrt(static_cast<double>(h));
  for (const char* g : {"f", "i", "c", "o"}) {
    params_.emplace_back(std::string("W_") + g, h, z);
    init_uniform(params_.back(), bound, rng);
  }
  for (const char* g : {"f", "i", "c", "o"}) {
    params_.emplace_back(std::string("b_") + g, h, 1);
  }
  // Forget-gate bias starts at 1 so early gradients pass through time.
  std::fill(params_[4].data.begin(), params_[4].data.end(), 1.0);
  params_.emplace_back("W_y", kNumClasses, h);
  init_uniform(params_.back(), bound, rng);
  params_.emplace_back("b_y", kNumClasses, 1);
}

nlohmann::json LstmModel::config_json() const {
  return {{"hidden", cfg_.hidden}, {"seed", cfg_.seed}};
}

namespace {

struct LstmCache {
  std::vector<Vec> z, f, i, g, o, c, h;  // c and h include the t = -1 zero state at index 0
};

void lstm_forward(const std::vector<Tensor>& p, std::size_t channels, std::size_t hidden,
                  const Matrix& x, LstmCache& cache) {
  require(x.cols() == channels, ErrorKind::kValidation, "lstm input has the wrong channel count");
  require(x.rows() >= 1, ErrorKind::kValidation, "lstm input window is empty");
  const auto T = x.rows();
  auto X = view(x);
  auto Wf = view(p[0]), Wi = view(p[1]), Wc = view(p[2]), Wo = view(p[3]);
  auto bf = view(p[4]), bi = view(p[5]), bc = view(p[6]), bo = view(p[7]);
  cache.c.assign(1, Vec::Zero(static_cast<Eigen::Index>(hidden)));
  cache.h.assign(1, Vec::Zero(static_cast<Eigen::Index>(hidden)));
  cache.z.clear();
  cache.f.clear();
  cache.i.clear();
  cache.g.clear();
  cache.o.clear();
  for (std::size_t t = 0; t < T; ++t) {
    Vec z(static_cast<Eigen::Index>(channels + hidden));
    z.head(static_cast<Eigen::Index>(channels)) = X.row(static_cast<Eigen::Index>(t)).transpose();
    z.tail(static_cast<Eigen::Index>(hidden)) = cache.h.back();
    Vec f = (Wf * z + bf).unaryExpr(&sigmoid);
    Vec i = (Wi * z + bi).unaryExpr(&sigmoid);
    Vec g = (Wc * z + bc).array().tanh();
    Vec o = (Wo * z + bo).unaryExpr(&sigmoid);
    Vec c = f.cwiseProduct(cache.c.back()) + i.cwiseProduct(g);
    Vec h = o.cwiseProduct(c.array().tanh().matrix());
    cache.z.push_back(std::move(z));
    cache.f.push_back(std::move(f));
    cache.i.push_back(std::move(i));
    cache.g.push_back(std::move(g));
    cache.o.push_back(std::move(o));
    cache.c.push_back(std::move(c));
    cache.h.push_back(std::move(h));
  }
}

std::array<double, kNumClasses> head(const std::vector<Tensor>& p, std::size_t wy, const Vec& feat) {
  Vec s = view(p[wy]) * feat + view(p[wy + 1]);
  return {s[0], s[1], s[2]};
}

}  // namespace

std::array<double, kNumClasses> LstmModel::logits(const Matrix& window) const {
  LstmCache cache;
  lstm_forward(params_, channels_, cfg_.hidden, window, cache);
  return head(params_, 8, cache.h.back());
}

LstmModel::Trace LstmModel::trace(const Matrix& window) const {
  LstmCache cache;
  lstm_forward(params_, channels_, cfg_.hidden, window, cache);
  Trace tr{Matrix(window.rows(), cfg_.hidden), Matrix(window.rows(), cfg_.hidden),
           Matrix(window.rows(), cfg_.hidden)};
  for (std::size_t t = 0; t < window.rows(); ++t) {
    for (std::size_t k = 0; k < cfg_.hidden; ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      tr.h(t, k) = cache.h[t + 1][kk];
      tr.c(t, k) = cache.c[t + 1][kk];
      tr.c_cand(t, k) = cache.g[t][kk];
    }
  }
  return tr;
}

double LstmModel::loss_and_grad(const Matrix& window, int label, std::vector<Tensor>& grads) const {
  LstmCache cache;
  lstm_forward(params_, channels_, cfg_.hidden, window, cache);
  const auto p = softmax3(head(params_, 8, cache.h.back()));
  const double loss = -std::log(std::max(p[label], 1e-300));

  Vec dlogit(kNumClasses);
  for (int k = 0; k < kNumClasses; ++k) dlogit[k] = p[k] - (k == label ? 1.0 : 0.0);
  view(grads[8]) += dlogit * cache.h.back().transpose();
  view(grads[9]) += dlogit;
  Vec dh = view(params_[8]).transpose() * dlogit;
  Vec dc = Vec::Zero(static_cast<Eigen::Index>(cfg_.hidden));

  const auto H = static_cast<Eigen::Index>(cfg_.hidden);
  const auto C = static_cast<Eigen::Index>(channels_);
  for (std::size_t t = window.rows(); t-- > 0;) {
    const Vec& f = cache.f[t];
    const Vec& i = cache.i[t];
    const Vec& g = cache.g[t];
    const Vec& o = cache.o[t];
    const Vec& c = cache.c[t + 1];
    const Vec& c_prev = cache.c[t];
    Vec tc = c.array().tanh();
    Vec d_o = dh.cwiseProduct(tc);
    dc += dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
    Vec daf = dc.cwiseProduct(c_prev).cwiseProduct(f.cwiseProduct((1.0 - f.array()).matrix()));
    Vec dai = dc.cwiseProduct(g).cwiseProduct(i.cwiseProduct((1.0 - i.array()).matrix()));
    Vec dag = dc.cwiseProduct(i).cwiseProduct((1.0 - g.array().square()).matrix());
    Vec dao = d_o.cwiseProduct(o.cwiseProduct((1.0 - o.array()).matrix()));
    const Vec& z = cache.z[t];
    const Vec* da[4] = {&daf, &dai, &dag, &dao};
    Vec dz = Vec::Zero(C + H);
    for (int gate = 0; gate < 4; ++gate) {
      view(grads[gate]) += (*da[gate]) * z.transpose();
      view(grads[4 + gate]) += *da[gate];
      dz += view(params_[gate]).transpose() * (*da[gate]);
    }
    dh = dz.tail(H);
    dc = dc.cwiseProduct(f);
  }
  return loss;
}

// ---------------------------------------------------------------- encoder

void EncoderConfig::validate() const {
  require(d_model >= 1 && n_heads >= 1 && n_blocks >= 1, ErrorKind::kConfig,
          "encoder sizes must be >= 1");
  require(d_model % n_heads == 0, ErrorKind::kConfig,
          "encoder.d_model (" + std::to_string(d_model) + ") must be divisible by encoder.n_heads (" +
              std::to_string(n_heads) + ")");
  require(max_len >= 1, ErrorKind::kConfig, "encoder.max_len must be >= 1");
}

namespace {

// Parameter layout: W_in, b_in, then 13 tensors per block, then W_y, b_y.
constexpr std::size_t kPerBlock = 13;
enum BlockSlot { kWq, kWk, kWv, kWo, kBo, kG1, kBe1, kW1, kB1, kW2, kB2, kG2, kBe2 };

std::size_t slot(std::size_t block, BlockSlot s) { return 2 + block * kPerBlock + s; }

RMat positional_table(std::size_t len, std::size_t d) {
  RMat pe(static_cast<Eigen::Index>(len), static_cast<Eigen::Index>(d));
  for (std::size_t pos = 0; pos < len; ++pos) {
    for (std::size_t k = 0; k < d; ++k) {
      const double rate = std::pow(10000.0, -static_cast<double>(2 * (k / 2)) / static_cast<double>(d));
      const double a = static_cast<double>(pos) * rate;
      pe(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(k)) = k % 2 == 0 ? std::sin(a) : std::cos(a);
    }
  }
  return pe;
}

struct LnCache {
  RMat xhat;
  Vec inv_sigma;
};

RMat layer_norm(const RMat& x, CMapT gain, CMapT bias, LnCache& cache) {
  const auto L = x.rows();
  cache.xhat.resize(L, x.cols());
  cache.inv_sigma.resize(L);
  for (Eigen::Index r = 0; r < L; ++r) {
    const double mu = x.row(r).mean();
    const double var = (x.row(r).array() - mu).square().mean();
    const double inv = 1.0 / std::sqrt(var + kLnEps);
    cache.inv_sigma[r] = inv;
    cache.xhat.row(r) = (x.row(r).array() - mu) * inv;
  }
  RMat y = cache.xhat.array().rowwise() * gain.row(0).array();
  y.rowwise() += bias.row(0);
  return y;
}

RMat layer_norm_back(const RMat& dy, CMapT gain, const LnCache& cache, MapT dgain, MapT dbias) {
  dgain.row(0) += (dy.array() * cache.xhat.array()).colwise().sum().matrix();
  dbias.row(0) += dy.colwise().sum();
  RMat dxhat = dy.array().rowwise() * gain.row(0).array();
  RMat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double m1 = dxhat.row(r).mean();
    const double m2 = (dxhat.row(r).array() * cache.xhat.row(r).array()).mean();
    dx.row(r) = (dxhat.row(r).array() - m1 - cache.xhat.row(r).array() * m2) * cache.inv_sigma[r];
  }
  return dx;
}

struct BlockCache {
  RMat in, q, k, v, hc, z1, u, rz;
  std::vector<RMat> attn;
  LnCache ln1, ln2;
};

struct EncoderCache {
  RMat e0;
  std::vector<BlockCache> blocks;
  RMat out;
};

}  // namespace

EncoderModel::EncoderModel(std::size_t channels, EncoderConfig cfg) : SequenceModel(channels), cfg_(cfg) {
  cfg_.validate();
  require(channels >= 1, ErrorKind::kConfig, "encoder needs at least one input channel");
  const std::size_t d = cfg_.d_model, ff = cfg_.ffn_width();
  Rng rng = make_rng(cfg_.seed, 0xe2c);
  auto xavier = [&](const std::string& name, std::size_t in, std::size_t out) {
    params_.emplace_back(name, in, out);
    init_uniform(params_.back(), std::sqrt(6.0 / static_cast<double>(in + out)), rng);
  };
  auto filled = [&](const std::string& name, std::size_t n, double value) {
    params_.emplace_back(name, 1, n);
    std::fill(params_.back().data.begin(), params_.back().data.end(), value);
  };
  xavier("W_in", channels, d);
  filled("b_in", d, 0.0);
  for (std::size_t b = 0; b < cfg_.n_blocks; ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    xavier(p + "W_Q", d, d);
    xavier(p + "W_K", d, d);
    xavier(p + "W_V", d, d);
    xavier(p + "W_O", d, d);
    filled(p + "b_O", d, 0.0);
    filled(p + "ln1.gain", d, 1.0);
    filled(p + "ln1.bias", d, 0.0);
    xavier(p + "W_1", d, ff);
    filled(p + "b_1", ff, 0.0);
    xavier(p + "W_2", ff, d);
    filled(p + "b_2", d, 0.0);
    filled(p + "ln2.gain", d, 1.0);
    filled(p + "ln2.bias", d, 0.0);
  }
  xavier("W_y", d, kNumClasses);
  filled("b_y", kNumClasses, 0.0);
}

nlohmann::json EncoderModel::config_json() const {
  return {{"d_model", cfg_.d_model}, {"n_heads", cfg_.n_heads}, {"n_blocks", cfg_.n_blocks},
          {"d_ff", cfg_.d_ff},       {"max_len", cfg_.max_len}, {"positional", cfg_.positional},
          {"seed", cfg_.seed}};
}

namespace {

void encoder_forward(const std::vector<Tensor>& p, const EncoderConfig& cfg, std::size_t channels,
                     const Matrix& x, EncoderCache& cache) {
  require(x.cols() == channels, ErrorKind::kValidation, "encoder input has the wrong channel count");
  require(x.rows() >= 1 && x.rows() <= cfg.max_len, ErrorKind::kValidation,
          "encoder window length must lie in [1, max_len]");
  const auto L = static_cast<Eigen::Index>(x.rows());
  const auto dk = static_cast<Eigen::Index>(cfg.d_model / cfg.n_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  RMat e = view(x) * view(p[0]);
  e.rowwise() += view(p[1]).row(0);
  if (cfg.positional) e += positional_table(x.rows(), cfg.d_model);
  cache.e0 = e;
  cache.blocks.assign(cfg.n_blocks, {});
  for (std::size_t b = 0; b < cfg.n_blocks; ++b) {
    auto& bc = cache.blocks[b];
    bc.in = e;
    bc.q = e * view(p[slot(b, kWq)]);
    bc.k = e * view(p[slot(b, kWk)]);
    bc.v = e * view(p[slot(b, kWv)]);
    bc.hc.resize(L, static_cast<Eigen::Index>(cfg.d_model));
    bc.attn.resize(cfg.n_heads);
    for (std::size_t h = 0; h < cfg.n_heads; ++h) {
      const auto c0 = static_cast<Eigen::Index>(h) * dk;
      RMat s = bc.q.middleCols(c0, dk) * bc.k.middleCols(c0, dk).transpose() * scale;
      for (Eigen::Index r = 0; r < L; ++r) {
        const double m = s.row(r).maxCoeff();
        s.row(r) = (s.row(r).array() - m).exp();
        s.row(r) /= s.row(r).sum();
      }
      bc.hc.middleCols(c0, dk) = s * bc.v.middleCols(c0, dk);
      bc.attn[h] = std::move(s);
    }
    RMat att = bc.hc * view(p[slot(b, kWo)]);
    att.rowwise() += view(p[slot(b, kBo)]).row(0);
    bc.u = layer_norm(e + att, view(p[slot(b, kG1)]), view(p[slot(b, kBe1)]), bc.ln1);
    bc.z1 = bc.u * view(p[slot(b, kW1)]);
    bc.z1.rowwise() += view(p[slot(b, kB1)]).row(0);
    bc.rz = bc.z1.cwiseMax(0.0);
    RMat ff = bc.rz * view(p[slot(b, kW2)]);
    ff.rowwise() += view(p[slot(b, kB2)]).row(0);
    e = layer_norm(bc.u + ff, view(p[slot(b, kG2)]), view(p[slot(b, kBe2)]), bc.ln2);
  }
  cache.out = e;
}

}  // namespace

std::array<double, kNumClasses> EncoderModel::logits(const Matrix& window) const {
  EncoderCache cache;
  encoder_forward(params_, cfg_, channels_, window, cache);
  const std::size_t wy = params_.size() - 2;
  Eigen::RowVectorXd pooled = cache.out.colwise().mean();
  Eigen::RowVectorXd s = pooled * view(params_[wy]) + view(params_[wy + 1]).row(0);
  return {s[0], s[1], s[2]};
}

std::vector<std::vector<Matrix>> EncoderModel::attention(const Matrix& window) const {
  EncoderCache cache;
  encoder_forward(params_, cfg_, channels_, window, cache);
  std::vector<std::vector<Matrix>> out;
  for (const auto& bc : cache.blocks) {
    out.emplace_back();
    for (const auto& a : bc.attn) {
      Matrix m(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(a.cols()));
      MapT(m.data().data(), a.rows(), a.cols()) = a;
      out.back().push_back(std::move(m));
    }
  }
  return out;
}

double EncoderModel::loss_and_grad(const Matrix& window, int label, std::vector<Tensor>& grads) const {
  EncoderCache cache;
  encoder_forward(params_, cfg_, channels_, window, cache);
  const auto& p = params_;
  const std::size_t wy = p.size() - 2;
  const auto L = cache.out.rows();
  const auto dk = static_cast<Eigen::Index>(cfg_.d_model / cfg_.n_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Eigen::RowVectorXd pooled = cache.out.colwise().mean();
  Eigen::RowVectorXd s = pooled * view(p[wy]) + view(p[wy + 1]).row(0);
  const auto prob = softmax3({s[0], s[1], s[2]});
  const double loss = -std::log(std::max(prob[label], 1e-300));
  Eigen::RowVectorXd dlogit(kNumClasses);
  for (int k = 0; k < kNumClasses; ++k) dlogit[k] = prob[k] - (k == label ? 1.0 : 0.0);
  view(grads[wy]) += pooled.transpose() * dlogit;
  view(grads[wy + 1]).row(0) += dlogit;
  Eigen::RowVectorXd dpooled = dlogit * view(p[wy]).transpose();
  RMat de = dpooled.replicate(L, 1) / static_cast<double>(L);

  for (std::size_t b = cfg_.n_blocks; b-- > 0;) {
    const auto& bc = cache.blocks[b];
    // Out = LN2(U + FFN(U))
    RMat dr2 = layer_norm_back(de, view(p[slot(b, kG2)]), bc.ln2, view(grads[slot(b, kG2)]),
                               view(grads[slot(b, kBe2)]));
    RMat du = dr2;
    view(grads[slot(b, kW2)]) += bc.rz.transpose() * dr2;
    view(grads[slot(b, kB2)]).row(0) += dr2.colwise().sum();
    RMat dz1 = dr2 * view(p[slot(b, kW2)]).transpose();
    dz1 = (bc.z1.array() > 0.0).select(dz1, 0.0);
    view(grads[slot(b, kW1)]) += bc.u.transpose() * dz1;
    view(grads[slot(b, kB1)]).row(0) += dz1.colwise().sum();
    du += dz1 * view(p[slot(b, kW1)]).transpose();
    // U = LN1(In + Attn(In))
    RMat dr1 = layer_norm_back(du, view(p[slot(b, kG1)]), bc.ln1, view(grads[slot(b, kG1)]),
                               view(grads[slot(b, kBe1)]));
    RMat din = dr1;
    view(grads[slot(b, kWo)]) += bc.hc.transpose() * dr1;
    view(grads[slot(b, kBo)]).row(0) += dr1.colwise().sum();
    RMat dhc = dr1 * view(p[slot(b, kWo)]).transpose();
    RMat dq(L, static_cast<Eigen::Index>(cfg_.d_model)), dkm(L, static_cast<Eigen::Index>(cfg_.d_model)),
        dv(L, static_cast<Eigen::Index>(cfg_.d_model));
    for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
      const auto c0 = static_cast<Eigen::Index>(h) * dk;
      const RMat& a = bc.attn[h];
      RMat dh = dhc.middleCols(c0, dk);
      RMat da = dh * bc.v.middleCols(c0, dk).transpose();
      dv.middleCols(c0, dk) = a.transpose() * dh;
      Eigen::VectorXd rowdot = (da.array() * a.array()).rowwise().sum();
      RMat ds = a.array() * (da.colwise() - rowdot).array();
      dq.middleCols(c0, dk) = ds * bc.k.middleCols(c0, dk) * scale;
      dkm.middleCols(c0, dk) = ds.transpose() * bc.q.middleCols(c0, dk) * scale;
    }
    view(grads[slot(b, kWq)]) += bc.in.transpose() * dq;
    view(grads[slot(b, kWk)]) += bc.in.transpose() * dkm;
    view(grads[slot(b, kWv)]) += bc.in.transpose() * dv;
    din += dq * view(p[slot(b, kWq)]).transpose() + dkm * view(p[slot(b, kWk)]).transpose() +
           dv * view(p[slot(b, kWv)]).transpose();
    de = std::move(din);
  }
  view(grads[0]) += view(window).transpose() * de;
  view(grads[1]).row(0) += de.colwise().sum();
  return loss;
}

// ---------------------------------------------------------------- registry

namespace {

void check_keys(const nlohmann::json& params, const std::string& kind, std::vector<std::string> allowed) {
  require(params.is_object(), ErrorKind::kConfig, kind + ": parameters must be an object");
  allowed.push_back("seed");
  for (const auto& [key, _] : params.items()) {
    require(std::find(allowed.begin(), allowed.end(), key) != allowed.end(), ErrorKind::kConfig,
            kind + "." + key + ": unknown parameter");
  }
}

std::size_t count_param(const nlohmann::json& params, const std::string& kind, const std::string& key,
                        std::size_t fallback) {
  if (!params.contains(key)) return fallback;
  const auto& v = params.at(key);
  require(v.is_number_integer() && v.get<long long>() >= 0, ErrorKind::kConfig,
          kind + "." + key + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

}  // namespace

std::unique_ptr<SequenceModel> make_sequence_model(const std::string& kind, std::size_t channels,
                                                   const nlohmann::json& params_in, std::uint64_t seed) {
  const nlohmann::json params = params_in.is_null() ? nlohmann::json::object() : params_in;
  if (kind == "lstm") {
    check_keys(params, kind, {"hidden"});
    LstmConfig c;
    c.hidden = count_param(params, kind, "hidden", c.hidden);
    c.seed = seed;
    return std::make_unique<LstmModel>(channels, c);
  }
  if (kind == "encoder") {
    check_keys(params, kind, {"d_model", "n_heads", "n_blocks", "d_ff", "max_len", "positional"});
    EncoderConfig c;
    c.d_model = count_param(params, kind, "d_model", c.d_model);
    c.n_heads = count_param(params, kind, "n_heads", c.n_heads);
    c.n_blocks = count_param(params, kind, "n_blocks", c.n_blocks);
    c.d_ff = count_param(params, kind, "d_ff", c.d_ff);
    c.max_len = count_param(params, kind, "max_len", c.max_len);
    if (params.contains("positional")) {
      require(params.at("positional").is_boolean(), ErrorKind::kConfig,
              "encoder.positional: expected true or false");
      c.positional = params.at("positional").get<bool>();
    }
    c.seed = seed;
    return std::make_unique<EncoderModel>(channels, c);
  }
  fail(ErrorKind::kConfig, "unknown sequence model kind '" + kind + "'");
}

std::unique_ptr<SequenceModel> sequence_model_from_json(const nlohmann::json& j) {
  require(j.is_object() && j.value("format", "") == kSeqFormat, ErrorKind::kSchema,
          "not a sequence model file");
  require(j.value("version", 0) == kSeqFormatVersion, ErrorKind::kSchema,
          "unsupported sequence model version");
  nlohmann::json cfg = j.at("config");
  const auto seed = cfg.value("seed", 0ULL);
  cfg.erase("seed");
  auto m = make_sequence_model(j.at("kind").get<std::string>(), j.at("channels").get<std::size_t>(), cfg, seed);
  m->mean_ = j.at("standardization").at("mean").get<std::vector<double>>();
  m->scale_ = j.at("standardization").at("scale").get<std::vector<double>>();
  const auto& tensors = j.at("tensors");
  require(tensors.size() == m->params_.size(), ErrorKind::kSchema, "sequence model tensor count mismatch");
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    auto& t = m->params_[i];
    require(tensors[i].at("name") == t.name && tensors[i].at("rows") == t.rows && tensors[i].at("cols") == t.cols,
            ErrorKind::kSchema, "sequence model tensor '" + t.name + "' does not match the config");
    t.data = tensors[i].at("data").get<std::vector<double>>();
  }
  return m;
}

void save_sequence_model(const SequenceModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::kIo, "cannot write " + path);
  out << model.to_json().dump() << '\n';
  require(out.good(), ErrorKind::kIo, "failed writing " + path);
}

std::unique_ptr<SequenceModel> load_sequence_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::kIo, "cannot read " + path);
  try {
    return sequence_model_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kSchema, path + ": " + e.what());
  }
}

}  // namespace neurolos::seq
