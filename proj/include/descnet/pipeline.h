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

// The staged workflow: prepare, stage-1 training, representation, clustering,
// curation, stage-2 training, prediction, grading and reporting. Each stage
// reads and writes files in a work directory and records a manifest of the
// digests it consumed and produced.

#ifndef DESCNET_PIPELINE_H_
#define DESCNET_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "descnet/confidence.h"
#include "descnet/corpus.h"
#include "descnet/curation.h"
#include "descnet/features.h"
#include "descnet/kmeans.h"
#include "descnet/nnet.h"
#include "descnet/synth.h"

namespace descnet::pipeline {

namespace fs = std::filesystem;

struct DataConfig {
  fs::path entities;  // empty: use the synthetic corpus
  corpus::EntityFormat format = corpus::EntityFormat::kJsonl;
  fs::path taxonomy;
  fs::path embeddings;  // optional pre-trained vectors
};

struct FeatureConfig {
  features::ChannelLimits limits;
  int embedding_dim = 200;
  int pos_dim = 25;
  bool trainable = true;
};

struct Stage1Config {
  nnet::CnnConfig cnn;
  int per_class = 1000;
  double split_ratio = 0.7;
};

struct Stage2Config {
  nnet::CnnConfig cnn;
  double split_ratio = 0.9;
};

struct ReportConfig {
  confidence::EvaluationConfig evaluation;
  double threshold = 0.94;
};

struct PipelineConfig {
  fs::path base_dir;  // relative paths resolve against it
  fs::path work_dir = "work";
  uint64_t seed = 1;
  int workers = 1;
  DataConfig data;
  std::optional<corpus::SynthSpec> synthetic;
  FeatureConfig features;
  Stage1Config stage1;
  Stage2Config stage2;
  cluster::ClusterConfig cluster;
  curation::CurationConfig curation;
  ReportConfig report;
};

PipelineConfig parse_config(std::string_view text, const fs::path& base_dir);
PipelineConfig load_config(const fs::path& path);
// Canonical JSON form; its digest identifies the configuration.
std::string config_to_json(const PipelineConfig& config);

corpus::SynthSpec synth_from_json(std::string_view text);
std::string synth_to_json(const corpus::SynthSpec& spec);

struct RunOptions {
  bool force = false;
  std::optional<fs::path> work_dir;
  std::optional<uint64_t> seed;
  std::optional<int> workers;
  std::ostream* log = nullptr;
};

// Stage names in execution order.
const std::vector<std::string>& stage_names();

class StageContext;

class Pipeline {
 public:
  Pipeline(PipelineConfig config, RunOptions options);

  void run(std::string_view stage);
  // Every stage in order; gen-synth only for synthetic configs.
  void run_all();

  const fs::path& work_dir() const { return work_dir_; }
  const PipelineConfig& config() const { return config_; }
  const std::string& config_digest() const { return config_digest_; }

 private:
  void gen_synth(StageContext& ctx);
  void prepare(StageContext& ctx);
  void train1(StageContext& ctx);
  void represent(StageContext& ctx);
  void cluster(StageContext& ctx);
  void curate(StageContext& ctx);
  void train2(StageContext& ctx);
  void predict(StageContext& ctx);
  void grade(StageContext& ctx);
  void report(StageContext& ctx);

  PipelineConfig config_;
  RunOptions options_;
  fs::path work_dir_;
  std::string config_digest_;
};

// Entity representations, one row per entity.
struct Representations {
  std::vector<std::string> ids;
  cluster::PointMatrix values;
};

void save_representations(const fs::path& path, const Representations& reps);
// Reads the binary form or a TSV of "id\tx_1\t...\tx_R" lines.
Representations load_representations(const fs::path& path);

}  // namespace descnet::pipeline

#endif  // DESCNET_PIPELINE_H_
