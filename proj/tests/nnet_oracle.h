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

// Test-side oracles for the classifier: tiny random models and a central
// finite-difference check of backward().

#ifndef DESCNET_TESTS_NNET_ORACLE_H_
#define DESCNET_TESTS_NNET_ORACLE_H_

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <vector>

#include "descnet/features.h"
#include "descnet/nnet.h"
#include "descnet/random.h"

namespace descnet::testing {

struct TinyProblem {
  nnet::CnnModel model;
  std::vector<nnet::Example> batch;
};

// C <= 4, F <= 3, windows {1, 2}, D <= 6, random inputs whose valid lengths
// include sequences shorter than the widest window.
inline TinyProblem tiny_problem(uint64_t seed, bool with_pos = true) {
  Rng rng(seed);
  nnet::CnnConfig cfg;
  cfg.window_sizes = {1, 2};
  cfg.feature_maps = static_cast<int>(rng.between(1, 3));
  cfg.hidden_dim = static_cast<int>(rng.between(2, 5));
  cfg.class_count = static_cast<int>(rng.between(2, 4));
  cfg.dropout_rate = 0.0;
  const int dim = static_cast<int>(rng.between(2, 6));
  const int pos_dim = with_pos ? static_cast<int>(rng.between(0, 2)) : 0;
  const int vocab = 12, tags = 4, name_len = 6, desc_len = 5;

  features::EmbeddingTable table;
  table.words = features::RowMatrix(vocab, dim);
  for (Eigen::Index i = 0; i < table.words.size(); ++i) {
    table.words.data()[i] = rng.uniform(-0.5, 0.5);
  }
  table.words.row(features::kPad).setZero();
  table.pos = features::RowMatrix(tags, pos_dim);
  for (Eigen::Index i = 0; i < table.pos.size(); ++i) {
    table.pos.data()[i] = rng.uniform(-0.5, 0.5);
  }
  if (pos_dim > 0) table.pos.row(0).setZero();

  TinyProblem p;
  p.model = nnet::init_model(cfg, table, 0, rng.next());
  // Non-zero biases keep units off the ReLU kink.
  for (auto* banks : {&p.model.name_convs, &p.model.desc_convs}) {
    for (auto& b : *banks) {
      for (Eigen::Index f = 0; f < b.bias.size(); ++f) b.bias[f] = rng.uniform(-0.1, 0.1);
    }
  }
  for (Eigen::Index h = 0; h < p.model.dense1_bias.size(); ++h) {
    p.model.dense1_bias[h] = rng.uniform(-0.1, 0.1);
  }
  for (Eigen::Index c = 0; c < p.model.dense2_bias.size(); ++c) {
    p.model.dense2_bias[c] = rng.uniform(-0.1, 0.1);
  }

  const int n = static_cast<int>(rng.between(1, 4));
  for (int e = 0; e < n; ++e) {
    nnet::Example ex;
    ex.label = static_cast<int>(rng.below(cfg.class_count));
    auto& in = ex.input;
    in.valid_name_len = static_cast<int>(rng.between(1, name_len));
    in.valid_desc_len = static_cast<int>(rng.between(0, desc_len));
    in.name_ids.assign(name_len, features::kPad);
    in.desc_ids.assign(desc_len, features::kPad);
    for (int i = 0; i < in.valid_name_len; ++i) {
      in.name_ids[i] = static_cast<int>(rng.between(1, vocab - 1));
    }
    for (int i = 0; i < in.valid_desc_len; ++i) {
      in.desc_ids[i] = static_cast<int>(rng.between(1, vocab - 1));
    }
    if (pos_dim > 0) {
      std::vector<int> pos(desc_len, 0);
      for (int i = 0; i < in.valid_desc_len; ++i) pos[i] = static_cast<int>(rng.between(1, tags - 1));
      in.desc_pos_ids = pos;
    }
    p.batch.push_back(std::move(ex));
  }
  return p;
}

// Batch-mean loss computed from forward() alone.
inline double batch_loss(const nnet::CnnModel& m, const std::vector<nnet::Example>& batch) {
  double sum = 0.0;
  for (const auto& ex : batch) {
    sum += nnet::cross_entropy(nnet::forward(m, ex.input, false).probs, ex.label);
  }
  double loss = sum / static_cast<double>(batch.size());
  if (m.config.norm_mode == nnet::NormMode::kPenalty) {
    loss += nnet::l2_penalty(m, m.config.l2_penalty);
  }
  return loss;
}

struct GradCheck {
  double max_rel_error = 0.0;
  int checked = 0;
  int skipped = 0;  // entries whose interval straddles a kink
};

// Compares every analytic gradient entry with a central difference of step
// eps. An entry is skipped when the one-sided differences disagree by more
// than kink_tol, i.e. the loss is not differentiable inside [x-eps, x+eps].
inline GradCheck check_gradients(nnet::CnnModel model,
                                 const std::vector<nnet::Example>& batch,
                                 double eps = 1e-4, double kink_tol = 1e-3) {
  std::vector<const nnet::Example*> ptrs;
  for (const auto& ex : batch) ptrs.push_back(&ex);
  const nnet::Gradients g = nnet::backward(model, ptrs, 0, false, 1);
  const double f0 = batch_loss(model, batch);

  GradCheck out;
  auto check = [&](double& x, double analytic) {
    const double saved = x;
    x = saved + eps;
    const double fp = batch_loss(model, batch);
    x = saved - eps;
    const double fm = batch_loss(model, batch);
    x = saved;
    const double fwd = (fp - f0) / eps, bwd = (f0 - fm) / eps;
    if (std::abs(fwd - bwd) > kink_tol * std::max({1.0, std::abs(fwd), std::abs(bwd)})) {
      ++out.skipped;
      return;
    }
    const double numeric = (fp - fm) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
    out.max_rel_error = std::max(out.max_rel_error, std::abs(analytic - numeric) / denom);
    ++out.checked;
  };
  auto check_matrix = [&](auto& param, const auto& grad) {
    for (Eigen::Index i = 0; i < param.rows(); ++i) {
      for (Eigen::Index j = 0; j < param.cols(); ++j) check(param(i, j), grad(i, j));
    }
  };
  for (std::size_t b = 0; b < model.name_convs.size(); ++b) {
    check_matrix(model.name_convs[b].kernel, g.name_convs[b].kernel);
    check_matrix(model.name_convs[b].bias, g.name_convs[b].bias);
  }
  for (std::size_t b = 0; b < model.desc_convs.size(); ++b) {
    check_matrix(model.desc_convs[b].kernel, g.desc_convs[b].kernel);
    check_matrix(model.desc_convs[b].bias, g.desc_convs[b].bias);
  }
  check_matrix(model.dense1, g.dense1);
  check_matrix(model.dense1_bias, g.dense1_bias);
  check_matrix(model.dense2, g.dense2);
  check_matrix(model.dense2_bias, g.dense2_bias);
  auto& words = model.embeddings.words;
  for (Eigen::Index r = 0; r < words.rows(); ++r) {
    if (r == features::kPad) continue;
    auto it = g.words.slot.find(static_cast<int>(r));
    for (Eigen::Index d = 0; d < words.cols(); ++d) {
      check(words(r, d), it == g.words.slot.end() ? 0.0 : g.words.values[it->second][d]);
    }
  }
  auto& pos = model.embeddings.pos;
  for (Eigen::Index r = 1; r < pos.rows(); ++r) {
    for (Eigen::Index d = 0; d < pos.cols(); ++d) check(pos(r, d), g.pos(r, d));
  }
  // The reported loss must agree with the forward pass.
  out.max_rel_error = std::max(out.max_rel_error, std::abs(g.loss - f0) / std::max(1.0, f0));
  return out;
}

}  // namespace descnet::testing

#endif  // DESCNET_TESTS_NNET_ORACLE_H_
