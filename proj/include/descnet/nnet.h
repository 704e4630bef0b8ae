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

// Two-channel convolutional text classifier trained from scratch: forward
// pass, exact reverse-mode gradients, Adam, and the max-norm constraint.

#ifndef DESCNET_NNET_H_
#define DESCNET_NNET_H_

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "descnet/features.h"
#include "descnet/random.h"

namespace descnet::nnet {

// How the L2 constraint on dense weights is enforced.
enum class NormMode { kProjection, kPenalty };

struct CnnConfig {
  std::vector<int> window_sizes = {1, 2, 3, 4};
  // Feature maps per window size per channel.
  int feature_maps = 60;
  int hidden_dim = 200;
  int class_count = 0;
  double dropout_rate = 0.5;
  double lr = 0.001;
  int batch_size = 500;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  NormMode norm_mode = NormMode::kProjection;
  double max_norm = 3.0;
  double l2_penalty = 1e-4;
  int epochs = 20;
  int patience = 5;
  int workers = 1;
  uint64_t seed = 1;

  int representation_dim() const {
    return static_cast<int>(window_sizes.size()) * feature_maps * 2;
  }
  // Throws Error on an unusable configuration.
  void validate() const;
};

std::string config_to_json(const CnnConfig& config);
CnnConfig config_from_json(std::string_view text);

struct ConvBank {
  int window = 1;
  Eigen::MatrixXd kernel;  // (window * d_in) x F; row block k is offset k
  Eigen::VectorXd bias;    // F
};

struct CnnModel {
  CnnConfig config;
  features::EmbeddingTable embeddings;
  std::vector<ConvBank> name_convs;
  std::vector<ConvBank> desc_convs;
  Eigen::MatrixXd dense1;  // R x H
  Eigen::VectorXd dense1_bias;
  Eigen::MatrixXd dense2;  // H x C
  Eigen::VectorXd dense2_bias;
  uint64_t vocab_hash = 0;
};

// Glorot-uniform kernels and dense weights, zero biases.
CnnModel init_model(const CnnConfig& config, features::EmbeddingTable embeddings,
                    uint64_t vocab_hash, uint64_t seed);

struct ForwardResult {
  Eigen::VectorXd logits;
  Eigen::VectorXd probs;
  Eigen::VectorXd repr;  // pooled concatenation, before dropout
};

// `rng` drives dropout and is required when train_mode is set.
ForwardResult forward(const CnnModel& model, const features::ChannelInput& input,
                      bool train_mode, Rng* rng = nullptr);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// -log(max(probs[label], 1e-12)).
double cross_entropy(const Eigen::VectorXd& probs, int label);

// (lambda / 2) * squared Frobenius norm of both dense weight matrices.
double l2_penalty(const CnnModel& model, double lambda);

struct Example {
  features::ChannelInput input;
  int label = 0;
};

// Embedding rows touched by a batch, in first-touch order.
struct SparseRows {
  std::vector<int> rows;
  std::vector<Eigen::VectorXd> values;
  std::unordered_map<int, std::size_t> slot;

  Eigen::VectorXd& at(int row, int dim);
  void add(const SparseRows& other);
  void scale(double s);
};

struct ConvGrad {
  Eigen::MatrixXd kernel;
  Eigen::VectorXd bias;
};

struct Gradients {
  std::vector<ConvGrad> name_convs;
  std::vector<ConvGrad> desc_convs;
  Eigen::MatrixXd dense1;
  Eigen::VectorXd dense1_bias;
  Eigen::MatrixXd dense2;
  Eigen::VectorXd dense2_bias;
  SparseRows words;
  Eigen::MatrixXd pos;
  // Batch-mean loss, including the penalty term in penalty mode.
  double loss = 0.0;

  static Gradients zeros_like(const CnnModel& model);
  void add(const Gradients& other);
  void scale(double s);
};

// Batch-averaged gradients of the cross-entropy loss. Dropout masks are drawn
// per example from dropout_seed, so results do not depend on the worker
// count except through summation order.
Gradients backward(const CnnModel& model, std::span<const Example* const> batch,
                   uint64_t dropout_seed, bool dropout = true, int workers = 1);

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Moments for one flat tensor.
struct AdamState {
  long t = 0;
  std::vector<double> m;
  std::vector<double> v;
};

// One bias-corrected Adam update of a flat tensor; increments state.t.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const AdamOptions& options);

// Adam over every tensor of a model, with a single shared step counter.
class ModelOptimizer {
 public:
  ModelOptimizer(const CnnModel& model, const AdamOptions& options);
  void step(CnnModel& model, const Gradients& grads);
  long steps() const { return t_; }

 private:
  AdamOptions options_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
  features::RowMatrix word_m_;
  features::RowMatrix word_v_;
  std::vector<int> touched_rows_;
  std::vector<bool> touched_;
};

// Rescales every row whose L2 norm exceeds s to norm s.
void max_norm_project(Eigen::Ref<Eigen::MatrixXd> weights, double s);

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_macro_f1 = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  double best_val_macro_f1 = 0.0;
};

// Minibatch Adam with the configured L2 mode. Keeps the parameters of the
// epoch with the best validation macro-F1 (the last epoch when the
// validation set is empty) and stops after `patience` epochs without
// improvement.
TrainResult train(CnnModel& model, const std::vector<Example>& train_set,
                  const std::vector<Example>& val_set);

struct Prediction {
  int label = 0;
  double prob = 0.0;
};

// Argmax with ties to the lowest class index; dropout off.
Prediction predict(const CnnModel& model, const features::ChannelInput& input);

Eigen::VectorXd represent(const CnnModel& model,
                          const features::ChannelInput& input);

// Versioned little-endian checkpoint.
void save_model(const CnnModel& model, const std::filesystem::path& path);
CnnModel load_model(const std::filesystem::path& path);
std::string serialize_model(const CnnModel& model);
CnnModel deserialize_model(std::string_view bytes);

}  // namespace descnet::nnet

#endif  // DESCNET_NNET_H_
