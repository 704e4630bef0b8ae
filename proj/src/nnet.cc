// Copyright 2026 The descnet Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "descnet/nnet.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <thread>

#include "descnet/metrics.h"
#include "descnet/text.h"
#include "json.hpp"

namespace descnet::nnet {

using features::ChannelInput;
using features::RowMatrix;

void CnnConfig::validate() const {
  if (class_count < 1) throw Error("cnn config: class_count must be >= 1");
  if (window_sizes.empty()) throw Error("cnn config: no window sizes");
  for (int w : window_sizes) {
    if (w < 1) throw Error("cnn config: window sizes must be >= 1");
  }
  if (feature_maps < 1 || hidden_dim < 1) {
    throw Error("cnn config: feature_maps and hidden_dim must be >= 1");
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw Error("cnn config: dropout_rate must lie in [0, 1)");
  }
  if (batch_size < 1 || epochs < 0 || patience < 0 || workers < 1) {
    throw Error("cnn config: invalid batch_size, epochs, patience or workers");
  }
  if (!(lr > 0.0) || !(max_norm > 0.0) || l2_penalty < 0.0) {
    throw Error("cnn config: lr and max_norm must be positive");
  }
}

std::string config_to_json(const CnnConfig& c) {
  nlohmann::json j = {
      {"window_sizes", c.window_sizes},
      {"feature_maps", c.feature_maps},
      {"hidden_dim", c.hidden_dim},
      {"class_count", c.class_count},
      {"dropout_rate", c.dropout_rate},
      {"lr", c.lr},
      {"batch_size", c.batch_size},
      {"adam_beta1", c.adam_beta1},
      {"adam_beta2", c.adam_beta2},
      {"adam_eps", c.adam_eps},
      {"norm_mode", c.norm_mode == NormMode::kPenalty ? "penalty" : "projection"},
      {"max_norm", c.max_norm},
      {"l2_penalty", c.l2_penalty},
      {"epochs", c.epochs},
      {"patience", c.patience},
      {"workers", c.workers},
      {"seed", c.seed},
  };
  return j.dump();
}

CnnConfig config_from_json(std::string_view text) {
  CnnConfig c;
  try {
    auto j = nlohmann::json::parse(text);
    c.window_sizes = j.value("window_sizes", c.window_sizes);
    c.feature_maps = j.value("feature_maps", c.feature_maps);
    c.hidden_dim = j.value("hidden_dim", c.hidden_dim);
    c.class_count = j.value("class_count", c.class_count);
    c.dropout_rate = j.value("dropout_rate", c.dropout_rate);
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
    c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
    c.adam_eps = j.value("adam_eps", c.adam_eps);
    const std::string mode = j.value("norm_mode", std::string("projection"));
    if (mode == "penalty") {
      c.norm_mode = NormMode::kPenalty;
    } else if (mode == "projection") {
      c.norm_mode = NormMode::kProjection;
    } else {
      throw Error("cnn config: unknown norm_mode \"" + mode + "\"");
    }
    c.max_norm = j.value("max_norm", c.max_norm);
    c.l2_penalty = j.value("l2_penalty", c.l2_penalty);
    c.epochs = j.value("epochs", c.epochs);
    c.patience = j.value("patience", c.patience);
    c.workers = j.value("workers", c.workers);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("cnn config: ") + e.what());
  }
  return c;
}

namespace {

void glorot(Eigen::MatrixXd& m, int fan_in, int fan_out, Rng& rng) {
  const double a = std::sqrt(6.0 / (fan_in + fan_out));
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = rng.uniform(-a, a);
  }
}

std::vector<ConvBank> make_banks(const CnnConfig& c, int d_in, Rng& rng) {
  std::vector<ConvBank> banks;
  for (int w : c.window_sizes) {
    ConvBank b;
    b.window = w;
    b.kernel.resize(w * d_in, c.feature_maps);
    glorot(b.kernel, w * d_in, c.feature_maps, rng);
    b.bias = Eigen::VectorXd::Zero(c.feature_maps);
    banks.push_back(std::move(b));
  }
  return banks;
}

}  // namespace

CnnModel init_model(const CnnConfig& config, features::EmbeddingTable embeddings,
                    uint64_t vocab_hash, uint64_t seed) {
  config.validate();
  if (embeddings.dim() < 1 || embeddings.words.rows() < features::kSpecialCount) {
    throw Error("init_model: embedding table is empty");
  }
  CnnModel m;
  m.config = config;
  m.vocab_hash = vocab_hash;
  Rng rng(derive_seed(seed, "init"));
  const int D = embeddings.dim();
  const int d_desc = D + embeddings.pos_dim();
  m.name_convs = make_banks(config, D, rng);
  m.desc_convs = make_banks(config, d_desc, rng);
  const int R = config.representation_dim();
  m.dense1.resize(R, config.hidden_dim);
  glorot(m.dense1, R, config.hidden_dim, rng);
  m.dense1_bias = Eigen::VectorXd::Zero(config.hidden_dim);
  m.dense2.resize(config.hidden_dim, config.class_count);
  glorot(m.dense2, config.hidden_dim, config.class_count, rng);
  m.dense2_bias = Eigen::VectorXd::Zero(config.class_count);
  m.embeddings = std::move(embeddings);
  return m;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double top = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - top).exp();
  return e / e.sum();
}

double cross_entropy(const Eigen::VectorXd& probs, int label) {
  return -std::log(std::max(probs[label], 1e-12));
}

double l2_penalty(const CnnModel& model, double lambda) {
  return 0.5 * lambda *
         (model.dense1.squaredNorm() + model.dense2.squaredNorm());
}

// --- Forward ----------------------------------------------------------------

namespace {

struct ChannelTrace {
  RowMatrix x;                           // valid positions x d_in
  std::vector<std::vector<int>> argmax;  // per bank, per map; -1 if inactive
};

struct Trace {
  ChannelTrace name;
  ChannelTrace desc;
  Eigen::VectorXd repr;
  Eigen::VectorXd repr_mask;  // inverted-dropout scale per unit
  Eigen::VectorXd h_pre;
  Eigen::VectorXd h_mask;
  Eigen::VectorXd h_in;  // after ReLU and dropout
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
};

RowMatrix embed_name(const CnnModel& m, const ChannelInput& in) {
  const int n = in.valid_name_len;
  if (n > static_cast<int>(in.name_ids.size())) {
    throw Error("forward: valid_name_len exceeds padded length");
  }
  RowMatrix x(n, m.embeddings.dim());
  for (int i = 0; i < n; ++i) x.row(i) = m.embeddings.words.row(in.name_ids[i]);
  return x;
}

RowMatrix embed_desc(const CnnModel& m, const ChannelInput& in) {
  const int n = in.valid_desc_len;
  if (n > static_cast<int>(in.desc_ids.size())) {
    throw Error("forward: valid_desc_len exceeds padded length");
  }
  const int D = m.embeddings.dim();
  const int Dp = m.embeddings.pos_dim();
  RowMatrix x = RowMatrix::Zero(n, D + Dp);
  for (int i = 0; i < n; ++i) {
    x.row(i).head(D) = m.embeddings.words.row(in.desc_ids[i]);
    if (Dp > 0 && in.desc_pos_ids) {
      x.row(i).tail(Dp) = m.embeddings.pos.row((*in.desc_pos_ids)[i]);
    }
  }
  return x;
}

// Convolution, ReLU and max-over-time pooling over valid positions only.
// Windows longer than the sequence pool to zero.
void pool_channel(const std::vector<ConvBank>& banks, ChannelTrace& ch, int F,
                  double* out) {
  const auto n = ch.x.rows();
  const auto d = ch.x.cols();
  ch.argmax.assign(banks.size(), std::vector<int>(F, -1));
  for (std::size_t b = 0; b < banks.size(); ++b) {
    const ConvBank& bank = banks[b];
    double* pooled = out + b * F;
    const int w = bank.window;
    if (n < w) {
      std::fill(pooled, pooled + F, 0.0);
      continue;
    }
    const auto P = n - w + 1;
    Eigen::MatrixXd z = ch.x.topRows(P) * bank.kernel.topRows(d);
    for (int k = 1; k < w; ++k) {
      z.noalias() += ch.x.middleRows(k, P) * bank.kernel.middleRows(k * d, d);
    }
    for (int f = 0; f < F; ++f) {
      Eigen::Index best = 0;
      double top = z(0, f);
      for (Eigen::Index p = 1; p < P; ++p) {
        if (z(p, f) > top) {
          top = z(p, f);
          best = p;
        }
      }
      top += bank.bias[f];
      if (top > 0.0) {
        pooled[f] = top;
        ch.argmax[b][f] = static_cast<int>(best);
      } else {
        pooled[f] = 0.0;
      }
    }
  }
}

void dropout_mask(Eigen::VectorXd& mask, Eigen::Index n, double rate, Rng* rng) {
  mask.resize(n);
  if (rng == nullptr || rate <= 0.0) {
    mask.setOnes();
    return;
  }
  const double keep = 1.0 - rate;
  for (Eigen::Index i = 0; i < n; ++i) {
    mask[i] = rng->uniform() < keep ? 1.0 / keep : 0.0;
  }
}

void run_forward(const CnnModel& m, const ChannelInput& in, Rng* rng,
                 Trace& t) {
  const int F = m.config.feature_maps;
  const int half = static_cast<int>(m.name_convs.size()) * F;
  t.repr.resize(2 * half);
  t.name.x = embed_name(m, in);
  t.desc.x = embed_desc(m, in);
  pool_channel(m.name_convs, t.name, F, t.repr.data());
  pool_channel(m.desc_convs, t.desc, F, t.repr.data() + half);

  dropout_mask(t.repr_mask, t.repr.size(), m.config.dropout_rate, rng);
  const Eigen::VectorXd r_in = t.repr.cwiseProduct(t.repr_mask);
  t.h_pre = m.dense1.transpose() * r_in + m.dense1_bias;
  dropout_mask(t.h_mask, t.h_pre.size(), m.config.dropout_rate, rng);
  t.h_in = t.h_pre.cwiseMax(0.0).cwiseProduct(t.h_mask);
  t.logits = m.dense2.transpose() * t.h_in + m.dense2_bias;
  t.probs = softmax(t.logits);
}

}  // namespace

ForwardResult forward(const CnnModel& model, const ChannelInput& input,
                      bool train_mode, Rng* rng) {
  if (train_mode && rng == nullptr) {
    throw Error("forward: train mode needs a random source");
  }
  Trace t;
  run_forward(model, input, train_mode ? rng : nullptr, t);
  return {std::move(t.logits), std::move(t.probs), std::move(t.repr)};
}

// --- Gradients --------------------------------------------------------------

Eigen::VectorXd& SparseRows::at(int row, int dim) {
  auto [it, inserted] = slot.emplace(row, rows.size());
  if (inserted) {
    rows.push_back(row);
    values.push_back(Eigen::VectorXd::Zero(dim));
  }
  return values[it->second];
}

void SparseRows::add(const SparseRows& other) {
  for (std::size_t i = 0; i < other.rows.size(); ++i) {
    at(other.rows[i], static_cast<int>(other.values[i].size())) += other.values[i];
  }
}

void SparseRows::scale(double s) {
  for (auto& v : values) v *= s;
}

namespace {

std::vector<ConvGrad> zero_conv_grads(const std::vector<ConvBank>& banks) {
  std::vector<ConvGrad> out;
  for (const ConvBank& b : banks) {
    out.push_back({Eigen::MatrixXd::Zero(b.kernel.rows(), b.kernel.cols()),
                   Eigen::VectorXd::Zero(b.bias.size())});
  }
  return out;
}

}  // namespace

Gradients Gradients::zeros_like(const CnnModel& m) {
  Gradients g;
  g.name_convs = zero_conv_grads(m.name_convs);
  g.desc_convs = zero_conv_grads(m.desc_convs);
  g.dense1 = Eigen::MatrixXd::Zero(m.dense1.rows(), m.dense1.cols());
  g.dense1_bias = Eigen::VectorXd::Zero(m.dense1_bias.size());
  g.dense2 = Eigen::MatrixXd::Zero(m.dense2.rows(), m.dense2.cols());
  g.dense2_bias = Eigen::VectorXd::Zero(m.dense2_bias.size());
  g.pos = Eigen::MatrixXd::Zero(m.embeddings.pos.rows(), m.embeddings.pos.cols());
  return g;
}

void Gradients::add(const Gradients& o) {
  for (std::size_t i = 0; i < name_convs.size(); ++i) {
    name_convs[i].kernel += o.name_convs[i].kernel;
    name_convs[i].bias += o.name_convs[i].bias;
  }
  for (std::size_t i = 0; i < desc_convs.size(); ++i) {
    desc_convs[i].kernel += o.desc_convs[i].kernel;
    desc_convs[i].bias += o.desc_convs[i].bias;
  }
  dense1 += o.dense1;
  dense1_bias += o.dense1_bias;
  dense2 += o.dense2;
  dense2_bias += o.dense2_bias;
  words.add(o.words);
  pos += o.pos;
  loss += o.loss;
}

void Gradients::scale(double s) {
  for (auto& c : name_convs) {
    c.kernel *= s;
    c.bias *= s;
  }
  for (auto& c : desc_convs) {
    c.kernel *= s;
    c.bias *= s;
  }
  dense1 *= s;
  dense1_bias *= s;
  dense2 *= s;
  dense2_bias *= s;
  words.scale(s);
  pos *= s;
  loss *= s;
}

namespace {

// Backpropagates pooled-output gradients into kernels, biases and the channel
// input matrix.
RowMatrix backprop_channel(const std::vector<ConvBank>& banks,
                           const ChannelTrace& ch, const double* d_pooled,
                           int F, std::vector<ConvGrad>& grads) {
  const auto d = ch.x.cols();
  RowMatrix dx = RowMatrix::Zero(ch.x.rows(), d);
  for (std::size_t b = 0; b < banks.size(); ++b) {
    const ConvBank& bank = banks[b];
    ConvGrad& g = grads[b];
    for (int f = 0; f < F; ++f) {
      const int p = ch.argmax[b][f];
      const double dz = d_pooled[b * F + f];
      if (p < 0 || dz == 0.0) continue;
      g.bias[f] += dz;
      for (int k = 0; k < bank.window; ++k) {
        g.kernel.col(f).segment(k * d, d) += dz * ch.x.row(p + k).transpose();
        dx.row(p + k) += dz * bank.kernel.col(f).segment(k * d, d).transpose();
      }
    }
  }
  return dx;
}

void accumulate_example(const CnnModel& m, const Example& ex, Rng* rng,
                        Gradients& g) {
  Trace t;
  run_forward(m, ex.input, rng, t);
  g.loss += cross_entropy(t.probs, ex.label);

  Eigen::VectorXd d_logits = t.probs;
  d_logits[ex.label] -= 1.0;
  g.dense2.noalias() += t.h_in * d_logits.transpose();
  g.dense2_bias += d_logits;

  Eigen::VectorXd d_h = (m.dense2 * d_logits).cwiseProduct(t.h_mask);
  for (Eigen::Index i = 0; i < d_h.size(); ++i) {
    if (t.h_pre[i] <= 0.0) d_h[i] = 0.0;
  }
  const Eigen::VectorXd r_in = t.repr.cwiseProduct(t.repr_mask);
  g.dense1.noalias() += r_in * d_h.transpose();
  g.dense1_bias += d_h;
  const Eigen::VectorXd d_repr =
      (m.dense1 * d_h).cwiseProduct(t.repr_mask);

  const int F = m.config.feature_maps;
  const int half = static_cast<int>(m.name_convs.size()) * F;
  RowMatrix dx_name =
      backprop_channel(m.name_convs, t.name, d_repr.data(), F, g.name_convs);
  RowMatrix dx_desc = backprop_channel(m.desc_convs, t.desc,
                                       d_repr.data() + half, F, g.desc_convs);

  const int D = m.embeddings.dim();
  const int Dp = m.embeddings.pos_dim();
  if (m.embeddings.trainable) {
    for (Eigen::Index i = 0; i < dx_name.rows(); ++i) {
      const int row = ex.input.name_ids[i];
      if (row != features::kPad) g.words.at(row, D) += dx_name.row(i).transpose();
    }
    for (Eigen::Index i = 0; i < dx_desc.rows(); ++i) {
      const int row = ex.input.desc_ids[i];
      if (row != features::kPad) {
        g.words.at(row, D) += dx_desc.row(i).head(D).transpose();
      }
    }
  }
  if (Dp > 0 && ex.input.desc_pos_ids) {
    for (Eigen::Index i = 0; i < dx_desc.rows(); ++i) {
      const int row = (*ex.input.desc_pos_ids)[i];
      if (row != features::kPad) g.pos.row(row) += dx_desc.row(i).tail(Dp);
    }
  }
}

void accumulate_range(const CnnModel& m, std::span<const Example* const> batch,
                      std::size_t begin, std::size_t end, uint64_t seed,
                      bool dropout, Gradients& g) {
  for (std::size_t i = begin; i < end; ++i) {
    if (dropout) {
      Rng rng(derive_seed(seed, static_cast<uint64_t>(i)));
      accumulate_example(m, *batch[i], &rng, g);
    } else {
      accumulate_example(m, *batch[i], nullptr, g);
    }
  }
}

}  // namespace

Gradients backward(const CnnModel& model, std::span<const Example* const> batch,
                   uint64_t dropout_seed, bool dropout, int workers) {
  Gradients total = Gradients::zeros_like(model);
  if (batch.empty()) return total;
  for (const Example* ex : batch) {
    if (ex->label < 0 || ex->label >= model.config.class_count) {
      throw Error("backward: label out of range");
    }
  }
  const bool use_dropout = dropout && model.config.dropout_rate > 0.0;
  const std::size_t w =
      std::clamp<std::size_t>(static_cast<std::size_t>(workers), 1, batch.size());
  if (w == 1) {
    accumulate_range(model, batch, 0, batch.size(), dropout_seed, use_dropout,
                     total);
  } else {
    // Contiguous chunks, reduced in chunk order.
    std::vector<Gradients> parts(w, Gradients::zeros_like(model));
    std::vector<std::thread> threads;
    for (std::size_t k = 0; k < w; ++k) {
      const std::size_t begin = batch.size() * k / w;
      const std::size_t end = batch.size() * (k + 1) / w;
      threads.emplace_back([&, k, begin, end] {
        accumulate_range(model, batch, begin, end, dropout_seed, use_dropout,
                         parts[k]);
      });
    }
    for (auto& t : threads) t.join();
    for (const auto& p : parts) total.add(p);
  }
  total.scale(1.0 / static_cast<double>(batch.size()));
  if (model.config.norm_mode == NormMode::kPenalty) {
    const double lambda = model.config.l2_penalty;
    total.dense1 += lambda * model.dense1;
    total.dense2 += lambda * model.dense2;
    total.loss += l2_penalty(model, lambda);
  }
  return total;
}

// --- Optimization -----------------------------------------------------------

namespace {

void adam_kernel(double* params, const double* grads, double* m, double* v,
                 std::size_t n, long t, const AdamOptions& o) {
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < n; ++i) {
    const double g = grads == nullptr ? 0.0 : grads[i];
    m[i] = o.beta1 * m[i] + (1.0 - o.beta1) * g;
    v[i] = o.beta2 * v[i] + (1.0 - o.beta2) * g * g;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    params[i] -= o.lr * m_hat / (std::sqrt(v_hat) + o.eps);
  }
}

}  // namespace

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const AdamOptions& options) {
  if (params.size() != grads.size()) {
    throw Error("adam_step: parameter and gradient sizes differ");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) {
    throw Error("adam_step: state does not match parameter shape");
  }
  ++state.t;
  adam_kernel(params.data(), grads.data(), state.m.data(), state.v.data(),
              params.size(), state.t, options);
}

namespace {

// Dense tensors of a model in declared order.
template <typename Model, typename Fn>
void for_each_dense(Model& m, Fn&& fn) {
  for (auto& b : m.name_convs) {
    fn(b.kernel.data(), static_cast<std::size_t>(b.kernel.size()));
    fn(b.bias.data(), static_cast<std::size_t>(b.bias.size()));
  }
  for (auto& b : m.desc_convs) {
    fn(b.kernel.data(), static_cast<std::size_t>(b.kernel.size()));
    fn(b.bias.data(), static_cast<std::size_t>(b.bias.size()));
  }
  fn(m.dense1.data(), static_cast<std::size_t>(m.dense1.size()));
  fn(m.dense1_bias.data(), static_cast<std::size_t>(m.dense1_bias.size()));
  fn(m.dense2.data(), static_cast<std::size_t>(m.dense2.size()));
  fn(m.dense2_bias.data(), static_cast<std::size_t>(m.dense2_bias.size()));
}

std::vector<const double*> dense_grad_ptrs(const Gradients& g) {
  std::vector<const double*> out;
  for (const auto& c : g.name_convs) {
    out.push_back(c.kernel.data());
    out.push_back(c.bias.data());
  }
  for (const auto& c : g.desc_convs) {
    out.push_back(c.kernel.data());
    out.push_back(c.bias.data());
  }
  out.push_back(g.dense1.data());
  out.push_back(g.dense1_bias.data());
  out.push_back(g.dense2.data());
  out.push_back(g.dense2_bias.data());
  return out;
}

}  // namespace

ModelOptimizer::ModelOptimizer(const CnnModel& model, const AdamOptions& options)
    : options_(options) {
  for_each_dense(model, [&](const double*, std::size_t n) {
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
  });
  const auto& e = model.embeddings;
  m_.emplace_back(static_cast<std::size_t>(e.pos.size()), 0.0);
  v_.emplace_back(static_cast<std::size_t>(e.pos.size()), 0.0);
  word_m_ = RowMatrix::Zero(e.words.rows(), e.words.cols());
  word_v_ = RowMatrix::Zero(e.words.rows(), e.words.cols());
  touched_.assign(static_cast<std::size_t>(e.words.rows()), false);
}

void ModelOptimizer::step(CnnModel& model, const Gradients& grads) {
  ++t_;
  const auto ptrs = dense_grad_ptrs(grads);
  std::size_t k = 0;
  for_each_dense(model, [&](double* p, std::size_t n) {
    adam_kernel(p, ptrs[k], m_[k].data(), v_[k].data(), n, t_, options_);
    ++k;
  });
  auto& e = model.embeddings;
  if (e.pos.size() > 0) {
    // Row-major parameter, column-major gradient.
    const features::RowMatrix pos_grad = grads.pos;
    adam_kernel(e.pos.data(), pos_grad.data(), m_[k].data(), v_[k].data(),
                static_cast<std::size_t>(e.pos.size()), t_, options_);
  }
  if (!e.trainable) return;
  // Rows never touched have zero moments, for which the dense update is a
  // no-op; iterating only touched rows is exact.
  for (int row : grads.words.rows) {
    if (!touched_[row]) {
      touched_[row] = true;
      touched_rows_.push_back(row);
    }
  }
  const auto D = static_cast<std::size_t>(e.words.cols());
  Eigen::VectorXd zero = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(D));
  for (int row : touched_rows_) {
    if (row == features::kPad) continue;
    auto it = grads.words.slot.find(row);
    const double* g =
        it == grads.words.slot.end() ? zero.data() : grads.words.values[it->second].data();
    adam_kernel(e.words.row(row).data(), g, word_m_.row(row).data(),
                word_v_.row(row).data(), D, t_, options_);
  }
}

void max_norm_project(Eigen::Ref<Eigen::MatrixXd> weights, double s) {
  if (!(s > 0.0)) throw Error("max_norm_project: s must be positive");
  for (Eigen::Index i = 0; i < weights.rows(); ++i) {
    const double norm = weights.row(i).norm();
    if (norm > s) weights.row(i) *= s / norm;
  }
}

// --- Training loop ----------------------------------------------------------

Prediction predict(const CnnModel& model, const ChannelInput& input) {
  const ForwardResult r = forward(model, input, false);
  Prediction p;
  p.label = 0;
  for (Eigen::Index c = 1; c < r.probs.size(); ++c) {
    if (r.probs[c] > r.probs[p.label]) p.label = static_cast<int>(c);
  }
  p.prob = r.probs[p.label];
  return p;
}

Eigen::VectorXd represent(const CnnModel& model, const ChannelInput& input) {
  return forward(model, input, false).repr;
}

namespace {

struct Evaluation {
  double loss = 0.0;
  double macro_f1 = 0.0;
};

Evaluation evaluate(const CnnModel& model, const std::vector<Example>& set) {
  Evaluation ev;
  if (set.empty()) return ev;
  std::vector<int> pred(set.size()), gold(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const ForwardResult r = forward(model, set[i].input, false);
    ev.loss += cross_entropy(r.probs, set[i].label);
    int best = 0;
    for (Eigen::Index c = 1; c < r.probs.size(); ++c) {
      if (r.probs[c] > r.probs[best]) best = static_cast<int>(c);
    }
    pred[i] = best;
    gold[i] = set[i].label;
  }
  ev.loss /= static_cast<double>(set.size());
  ev.macro_f1 =
      confidence::macro_prf(pred, gold, model.config.class_count).macro_f1;
  return ev;
}

}  // namespace

TrainResult train(CnnModel& model, const std::vector<Example>& train_set,
                  const std::vector<Example>& val_set) {
  const CnnConfig& cfg = model.config;
  cfg.validate();
  if (train_set.empty()) throw Error("train: empty training set");
  for (const auto* set : {&train_set, &val_set}) {
    for (const Example& ex : *set) {
      if (ex.label < 0 || ex.label >= cfg.class_count) {
        throw Error("train: label out of range");
      }
    }
  }
  ModelOptimizer opt(model, {cfg.lr, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_eps});
  Rng shuffle_rng(derive_seed(cfg.seed, "shuffle"));
  Rng dropout_rng(derive_seed(cfg.seed, "dropout"));

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<const Example*> batch;

  TrainResult result;
  CnnModel best = model;
  double best_f1 = -1.0;
  int since_best = 0;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      batch.clear();
      for (std::size_t i = start; i < end; ++i) batch.push_back(&train_set[order[i]]);
      Gradients g = backward(model, batch, dropout_rng.next(), true, cfg.workers);
      loss_sum += g.loss * static_cast<double>(batch.size());
      opt.step(model, g);
      if (cfg.norm_mode == NormMode::kProjection) {
        max_norm_project(model.dense1, cfg.max_norm);
        max_norm_project(model.dense2, cfg.max_norm);
      }
    }
    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    const Evaluation ev = evaluate(model, val_set);
    rec.val_loss = ev.loss;
    rec.val_macro_f1 = ev.macro_f1;
    result.history.push_back(rec);

    if (val_set.empty() || ev.macro_f1 > best_f1) {
      best_f1 = ev.macro_f1;
      best = model;
      result.best_epoch = epoch;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (since_best > 0 && since_best >= cfg.patience) break;
  }
  if (!result.history.empty()) model = std::move(best);
  result.best_val_macro_f1 = std::max(best_f1, 0.0);
  return result;
}

}  // namespace descnet::nnet
