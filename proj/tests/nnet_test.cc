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

#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "descnet/nnet.h"
#include "descnet/text.h"
#include "doctest.h"
#include "nnet_oracle.h"

namespace descnet::nnet {
namespace {

features::EmbeddingTable random_table(int vocab, int dim, int tags, int pos_dim,
                                      uint64_t seed) {
  Rng rng(seed);
  features::EmbeddingTable t;
  t.words = features::RowMatrix(vocab, dim);
  for (Eigen::Index i = 0; i < t.words.size(); ++i) t.words.data()[i] = rng.uniform(-0.3, 0.3);
  t.words.row(features::kPad).setZero();
  t.pos = features::RowMatrix(tags, pos_dim);
  for (Eigen::Index i = 0; i < t.pos.size(); ++i) t.pos.data()[i] = rng.uniform(-0.3, 0.3);
  return t;
}

features::ChannelInput input(std::vector<int> name, std::vector<int> desc, int name_len,
                             int desc_len) {
  features::ChannelInput in;
  in.valid_name_len = static_cast<int>(name.size());
  in.valid_desc_len = static_cast<int>(desc.size());
  name.resize(name_len, features::kPad);
  desc.resize(desc_len, features::kPad);
  in.name_ids = std::move(name);
  in.desc_ids = std::move(desc);
  return in;
}

TEST_CASE("default architecture dimensions") {
  CnnConfig cfg;
  cfg.class_count = 48;
  CHECK(cfg.representation_dim() == 480);
  const CnnModel m = init_model(cfg, random_table(20, 8, 2, 0, 1), 0, 1);
  CHECK(m.dense1.rows() == 480);
  CHECK(m.dense1.cols() == 200);
  CHECK(m.dense2.rows() == 200);
  CHECK(m.dense2.cols() == 48);
  CHECK(m.name_convs.size() == 4);
  CHECK(m.desc_convs[3].kernel.rows() == 4 * 8);
  CHECK(m.desc_convs[3].kernel.cols() == 60);
  const ForwardResult r = forward(m, input({1, 5, 6, 2}, {7, 8, 9}, 16, 64), false);
  CHECK(r.repr.size() == 480);
  CHECK(r.probs.size() == 48);
}

TEST_CASE("init is deterministic and validates") {
  CnnConfig cfg;
  cfg.class_count = 3;
  cfg.feature_maps = 4;
  cfg.hidden_dim = 5;
  const auto t = random_table(10, 4, 3, 2, 2);
  const CnnModel a = init_model(cfg, t, 0, 7);
  const CnnModel b = init_model(cfg, t, 0, 7);
  const CnnModel c = init_model(cfg, t, 0, 8);
  CHECK(serialize_model(a) == serialize_model(b));
  CHECK(serialize_model(a) != serialize_model(c));
  CHECK(a.dense1_bias.isZero());
  CHECK(a.desc_convs[0].kernel.rows() == 4 + 2);
  const double bound = std::sqrt(6.0 / (cfg.representation_dim() + cfg.hidden_dim));
  CHECK(a.dense1.cwiseAbs().maxCoeff() <= bound);
  cfg.class_count = 0;
  CHECK_THROWS_AS(init_model(cfg, t, 0, 7), Error);
}

TEST_CASE("cross entropy closed forms") {
  const Eigen::VectorXd uniform = Eigen::VectorXd::Constant(48, 1.0 / 48);
  CHECK(cross_entropy(uniform, 17) == doctest::Approx(std::log(48.0)).epsilon(1e-12));
  CHECK(cross_entropy(uniform, 17) == doctest::Approx(3.8712).epsilon(1e-4));
  Eigen::VectorXd onehot = Eigen::VectorXd::Zero(4);
  onehot[2] = 1.0;
  CHECK(cross_entropy(onehot, 2) == 0.0);
  CHECK(cross_entropy(onehot, 1) == doctest::Approx(-std::log(1e-12)));
  CHECK(cross_entropy(onehot, 1) == doctest::Approx(27.631).epsilon(1e-4));
}

TEST_CASE("softmax sums to one for arbitrary logits") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    Eigen::VectorXd z(1 + rng.below(50));
    for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.uniform(-700, 700);
    const Eigen::VectorXd p = softmax(z);
    CHECK(std::abs(p.sum() - 1.0) < 1e-9);
    CHECK(p.allFinite());
  }
}

TEST_CASE("padding width does not change logits") {
  CnnConfig cfg;
  cfg.class_count = 3;
  cfg.feature_maps = 3;
  cfg.hidden_dim = 4;
  const CnnModel m = init_model(cfg, random_table(12, 5, 2, 0, 4), 0, 4);
  const auto a = forward(m, input({1, 4, 5, 2}, {6, 7}, 8, 6), false);
  const auto b = forward(m, input({1, 4, 5, 2}, {6, 7}, 20, 40), false);
  CHECK((a.logits - b.logits).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.repr == b.repr);
}

TEST_CASE("windows longer than the sequence pool to zero") {
  CnnConfig cfg;
  cfg.class_count = 2;
  cfg.feature_maps = 2;
  cfg.hidden_dim = 3;
  CnnModel m = init_model(cfg, random_table(12, 3, 2, 0, 5), 0, 5);
  for (auto& b : m.desc_convs) b.bias.setConstant(1.0);
  const int F = cfg.feature_maps, W = 4;
  // Description of length 2: windows 3 and 4 have no valid position.
  const auto r = forward(m, input({1, 5, 2}, {6, 7}, 8, 8), false).repr;
  CHECK(r.segment(W * F + 2 * F, 2 * F).isZero());
  CHECK(r.segment(W * F, F).minCoeff() > 0.0);
  // All-pad description: the whole description half is zero.
  const auto empty = forward(m, input({1, 5, 2}, {}, 8, 8), false).repr;
  CHECK(empty.tail(W * F).isZero());
  CHECK(empty.allFinite());
}

TEST_CASE("gradients match central finite differences") {
  double worst = 0.0;
  int checked = 0, skipped = 0;
  for (uint64_t seed = 1; seed <= 25; ++seed) {
    testing::TinyProblem p = testing::tiny_problem(seed);
    const testing::GradCheck r = testing::check_gradients(p.model, p.batch);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    skipped += r.skipped;
  }
  CAPTURE(worst);
  CAPTURE(skipped);
  CHECK(worst < 1e-4);
  CHECK(checked > 1000);
  CHECK(skipped * 100 <= checked);
}

TEST_CASE("gradients in penalty mode") {
  for (uint64_t seed = 100; seed < 105; ++seed) {
    testing::TinyProblem p = testing::tiny_problem(seed);
    p.model.config.norm_mode = NormMode::kPenalty;
    p.model.config.l2_penalty = 0.05;
    CHECK(testing::check_gradients(p.model, p.batch).max_rel_error < 1e-4);
  }
}

TEST_CASE("dense2 bias gradient with zero output weights") {
  testing::TinyProblem p = testing::tiny_problem(9);
  p.model.dense2.setZero();
  p.model.dense2_bias.setZero();
  std::vector<const Example*> batch;
  for (const auto& ex : p.batch) batch.push_back(&ex);
  const Gradients g = backward(p.model, batch, 0, false);
  const int C = p.model.config.class_count;
  Eigen::VectorXd expected = Eigen::VectorXd::Constant(C, 1.0 / C);
  for (const auto& ex : p.batch) expected[ex.label] -= 1.0 / static_cast<double>(p.batch.size());
  CHECK((g.dense2_bias - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("a duplicated example gives the same mean gradient") {
  testing::TinyProblem p = testing::tiny_problem(10);
  const Example* one[] = {&p.batch[0]};
  const Example* two[] = {&p.batch[0], &p.batch[0]};
  const Gradients a = backward(p.model, one, 0, false);
  const Gradients b = backward(p.model, two, 0, false);
  CHECK((a.dense1 - b.dense1).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((a.desc_convs[0].kernel - b.desc_convs[0].kernel).cwiseAbs().maxCoeff() < 1e-15);
  CHECK(a.loss == doctest::Approx(b.loss));
}

TEST_CASE("worker count changes only summation order") {
  testing::TinyProblem p = testing::tiny_problem(11);
  std::vector<const Example*> batch;
  for (int r = 0; r < 5; ++r) {
    for (const auto& ex : p.batch) batch.push_back(&ex);
  }
  p.model.config.dropout_rate = 0.5;
  const Gradients a = backward(p.model, batch, 42, true, 1);
  const Gradients b = backward(p.model, batch, 42, true, 3);
  const Gradients c = backward(p.model, batch, 42, true, 3);
  CHECK((a.dense1 - b.dense1).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(b.dense1 == c.dense1);
}

TEST_CASE("adam closed forms") {
  AdamOptions opt;
  std::vector<double> theta = {0.0, 0.0, 0.0};
  const std::vector<double> g = {2.0, -3.0, 0.5};
  AdamState state;
  adam_step(theta, g, state, opt);
  CHECK(state.t == 1);
  CHECK(std::abs(theta[0] - -0.001) < 1e-6);
  CHECK(std::abs(theta[1] - 0.001) < 1e-6);
  CHECK(std::abs(theta[2] - -0.001) < 1e-6);
  const double first = theta[0];
  adam_step(theta, g, state, opt);
  CHECK(state.t == 2);
  CHECK(std::abs((theta[0] - first) - first) < 1e-9);

  std::vector<double> still = {1.5, -2.0};
  const std::vector<double> zero = {0.0, 0.0};
  AdamState fresh;
  adam_step(still, zero, fresh, opt);
  CHECK(std::abs(still[0] - 1.5) <= 1e-15);
  CHECK(std::abs(still[1] - -2.0) <= 1e-15);
}

TEST_CASE("model optimizer matches per-tensor adam") {
  testing::TinyProblem p = testing::tiny_problem(12);
  std::vector<const Example*> batch;
  for (const auto& ex : p.batch) batch.push_back(&ex);
  CnnModel m = p.model;
  ModelOptimizer opt(m, AdamOptions{});
  std::vector<double> ref(m.dense1.data(), m.dense1.data() + m.dense1.size());
  AdamState ref_state;
  for (int step = 0; step < 3; ++step) {
    const Gradients g = backward(m, batch, 0, false);
    std::vector<double> grad(g.dense1.data(), g.dense1.data() + g.dense1.size());
    adam_step(ref, grad, ref_state, AdamOptions{});
    opt.step(m, g);
  }
  CHECK(opt.steps() == 3);
  double diff = 0.0;
  for (Eigen::Index i = 0; i < m.dense1.size(); ++i) {
    diff = std::max(diff, std::abs(m.dense1.data()[i] - ref[i]));
  }
  CHECK(diff < 1e-15);
  CHECK(m.embeddings.words.row(features::kPad).isZero());
}

TEST_CASE("max norm projection") {
  Eigen::MatrixXd w(3, 2);
  w << 6.0 / std::sqrt(2.0), 6.0 / std::sqrt(2.0), 2.0, 0.0, 0.0, 0.0;
  max_norm_project(w, 3.0);
  CHECK(w.row(0).norm() == doctest::Approx(3.0));
  CHECK(w(0, 0) == doctest::Approx(3.0 / std::sqrt(2.0)));
  CHECK(w(1, 0) == 2.0);
  CHECK(w.row(2).isZero());
  CHECK_THROWS_AS(max_norm_project(w, 0.0), Error);
}

// Two classes separated by the description word alone.
std::vector<Example> trivial_set(int n, uint64_t seed) {
  Rng rng(seed);
  std::vector<Example> out;
  for (int i = 0; i < n; ++i) {
    const int label = i % 2;
    std::vector<int> desc = {4 + label, static_cast<int>(rng.between(6, 9))};
    out.push_back({input({1, static_cast<int>(rng.between(6, 9)), 2}, desc, 6, 6), label});
  }
  return out;
}

CnnModel trivial_model(int epochs, int patience) {
  CnnConfig cfg;
  cfg.class_count = 2;
  cfg.feature_maps = 3;
  cfg.hidden_dim = 6;
  cfg.batch_size = 16;
  cfg.lr = 0.02;
  cfg.dropout_rate = 0.1;
  cfg.epochs = epochs;
  cfg.patience = patience;
  cfg.seed = 3;
  return init_model(cfg, random_table(10, 4, 1, 0, 6), 0, 6);
}

TEST_CASE("training reduces loss, respects max norm and is reproducible") {
  const auto train_set = trivial_set(96, 1);
  const auto val_set = trivial_set(32, 2);
  CnnModel a = trivial_model(6, 10);
  const TrainResult r = train(a, train_set, val_set);
  REQUIRE(r.history.size() >= 3);
  CHECK(r.history[1].train_loss < r.history[0].train_loss);
  CHECK(r.history[2].train_loss < r.history[1].train_loss);
  CHECK(r.best_val_macro_f1 == doctest::Approx(1.0));
  for (Eigen::Index i = 0; i < a.dense1.rows(); ++i) CHECK(a.dense1.row(i).norm() <= 3.0 + 1e-9);
  for (Eigen::Index i = 0; i < a.dense2.rows(); ++i) CHECK(a.dense2.row(i).norm() <= 3.0 + 1e-9);
  for (const auto& ex : val_set) {
    const Prediction p = predict(a, ex.input);
    CHECK(p.label == ex.label);
    CHECK(p.prob >= 0.5);
    CHECK(p.prob <= 1.0);
  }
  CnnModel b = trivial_model(6, 10);
  train(b, train_set, val_set);
  CHECK(serialize_model(a) == serialize_model(b));
}

TEST_CASE("train epoch and patience limits") {
  const auto train_set = trivial_set(32, 1);
  CnnModel one = trivial_model(1, 0);
  CHECK(train(one, train_set, trivial_set(8, 2)).history.size() == 1);
  CnnModel empty = trivial_model(1, 0);
  CHECK_THROWS_AS(train(empty, {}, {}), Error);
}

TEST_CASE("predict ties go to the lowest class") {
  CnnModel m = trivial_model(1, 0);
  m.dense2.setZero();
  m.dense2_bias.setZero();
  const Prediction p = predict(m, input({1, 6, 2}, {4}, 6, 6));
  CHECK(p.label == 0);
  CHECK(p.prob == doctest::Approx(0.5));
}

TEST_CASE("checkpoint round trip and corruption") {
  testing::TinyProblem p = testing::tiny_problem(13);
  p.model.vocab_hash = 0x1234;
  const std::string bytes = serialize_model(p.model);
  const CnnModel back = deserialize_model(bytes);
  CHECK(back.vocab_hash == 0x1234);
  CHECK(serialize_model(back) == bytes);
  for (const auto& ex : p.batch) {
    CHECK(forward(back, ex.input, false).logits == forward(p.model, ex.input, false).logits);
  }
  const auto path = std::filesystem::temp_directory_path() / "descnet_nnet_test.ckpt";
  save_model(p.model, path);
  CHECK(serialize_model(load_model(path)) == bytes);
  std::filesystem::remove(path);

  std::string bad = bytes;
  bad[0] = 'X';
  CHECK_THROWS_AS(deserialize_model(bad), Error);
  std::string version = bytes;
  version[8] = 9;
  CHECK_THROWS_AS(deserialize_model(version), Error);
  CHECK_THROWS_AS(deserialize_model(bytes.substr(0, bytes.size() / 2)), Error);
  std::string flipped = bytes;
  flipped[bytes.size() / 2] ^= 1;
  CHECK_THROWS_AS(deserialize_model(flipped), Error);
  CHECK_THROWS_AS(deserialize_model(bytes + "x"), Error);
}

TEST_CASE("config json round trip") {
  CnnConfig c;
  c.class_count = 7;
  c.window_sizes = {2, 3};
  c.norm_mode = NormMode::kPenalty;
  c.seed = 99;
  const CnnConfig back = config_from_json(config_to_json(c));
  CHECK(back.window_sizes == c.window_sizes);
  CHECK(back.norm_mode == NormMode::kPenalty);
  CHECK(back.seed == 99);
  CHECK(config_to_json(back) == config_to_json(c));
  CHECK_THROWS_AS(config_from_json(R"({"norm_mode": "odd"})"), Error);
}

}  // namespace
}  // namespace descnet::nnet
