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

#include "descnet/pipeline.h"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <ostream>
#include <unordered_map>

#include "descnet/random.h"
#include "descnet/text.h"
#include "json.hpp"

namespace descnet::pipeline {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

// --- Configuration -----------------------------------------------------------

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void read_path(const json& j, const char* key, fs::path& out) {
  if (j.contains(key)) out = j.at(key).get<std::string>();
}

json synth_json(const corpus::SynthSpec& s) {
  return {{"class_count", s.class_count},
          {"class_sizes", s.class_sizes},
          {"min_class_size", s.min_class_size},
          {"max_class_size", s.max_class_size},
          {"groups", s.groups},
          {"vocab_per_class", s.vocab_per_class},
          {"shared_vocab", s.shared_vocab},
          {"overlap_rate", s.overlap_rate},
          {"blend_rate", s.blend_rate},
          {"blend_min", s.blend_min},
          {"blend_max", s.blend_max},
          {"name_cue_rate", s.name_cue_rate},
          {"desc_len_min", s.desc_len_min},
          {"desc_len_max", s.desc_len_max},
          {"noise_rate", s.noise_rate},
          {"exact_noise_count", s.exact_noise_count},
          {"noise_target",
           s.noise_target == corpus::NoiseTarget::kPrior ? "prior" : "uniform"},
          {"unknown_fraction", s.unknown_fraction},
          {"undescribed_rate", s.undescribed_rate},
          {"emit_tokens", s.emit_tokens},
          {"seed", s.seed}};
}

corpus::SynthSpec synth_parse(const json& j) {
  corpus::SynthSpec s;
  read(j, "class_count", s.class_count);
  read(j, "class_sizes", s.class_sizes);
  read(j, "min_class_size", s.min_class_size);
  read(j, "max_class_size", s.max_class_size);
  read(j, "groups", s.groups);
  read(j, "vocab_per_class", s.vocab_per_class);
  read(j, "shared_vocab", s.shared_vocab);
  read(j, "overlap_rate", s.overlap_rate);
  read(j, "blend_rate", s.blend_rate);
  read(j, "blend_min", s.blend_min);
  read(j, "blend_max", s.blend_max);
  read(j, "name_cue_rate", s.name_cue_rate);
  read(j, "desc_len_min", s.desc_len_min);
  read(j, "desc_len_max", s.desc_len_max);
  read(j, "noise_rate", s.noise_rate);
  read(j, "exact_noise_count", s.exact_noise_count);
  if (j.contains("noise_target")) {
    const auto t = j.at("noise_target").get<std::string>();
    if (t == "prior") {
      s.noise_target = corpus::NoiseTarget::kPrior;
    } else if (t == "uniform") {
      s.noise_target = corpus::NoiseTarget::kUniform;
    } else {
      throw Error("config: unknown noise_target \"" + t + "\"");
    }
  }
  read(j, "unknown_fraction", s.unknown_fraction);
  read(j, "undescribed_rate", s.undescribed_rate);
  read(j, "emit_tokens", s.emit_tokens);
  read(j, "seed", s.seed);
  return s;
}

json cnn_json(const nnet::CnnConfig& c) {
  return json::parse(nnet::config_to_json(c));
}

}  // namespace

corpus::SynthSpec synth_from_json(std::string_view text) {
  try {
    return synth_parse(json::parse(text));
  } catch (const json::exception& e) {
    throw Error(std::string("synthetic: ") + e.what());
  }
}

std::string synth_to_json(const corpus::SynthSpec& spec) {
  return synth_json(spec).dump();
}

PipelineConfig parse_config(std::string_view text, const fs::path& base_dir) {
  PipelineConfig c;
  c.base_dir = base_dir;
  try {
    const json j = json::parse(text);
    read_path(j, "work_dir", c.work_dir);
    read(j, "seed", c.seed);
    read(j, "workers", c.workers);
    if (j.contains("data")) {
      const json& d = j.at("data");
      read_path(d, "entities", c.data.entities);
      read_path(d, "taxonomy", c.data.taxonomy);
      read_path(d, "embeddings", c.data.embeddings);
      if (d.contains("format")) {
        const auto f = d.at("format").get<std::string>();
        if (f == "jsonl") {
          c.data.format = corpus::EntityFormat::kJsonl;
        } else if (f == "tsv") {
          c.data.format = corpus::EntityFormat::kTsv;
        } else {
          throw Error("config: unknown entity format \"" + f + "\"");
        }
      }
    }
    if (j.contains("synthetic")) c.synthetic = synth_parse(j.at("synthetic"));
    if (j.contains("features")) {
      const json& f = j.at("features");
      read(f, "name_len", c.features.limits.name_len);
      read(f, "desc_len", c.features.limits.desc_len);
      read(f, "pos", c.features.limits.pos);
      read(f, "embedding_dim", c.features.embedding_dim);
      read(f, "pos_dim", c.features.pos_dim);
      read(f, "trainable", c.features.trainable);
    }
    if (j.contains("stage1")) {
      const json& s = j.at("stage1");
      c.stage1.cnn = nnet::config_from_json(s.dump());
      read(s, "per_class", c.stage1.per_class);
      read(s, "split_ratio", c.stage1.split_ratio);
    }
    if (j.contains("stage2")) {
      const json& s = j.at("stage2");
      c.stage2.cnn = nnet::config_from_json(s.dump());
      read(s, "split_ratio", c.stage2.split_ratio);
    }
    if (j.contains("cluster")) {
      const json& k = j.at("cluster");
      read(k, "k", c.cluster.k);
      read(k, "max_iters", c.cluster.max_iters);
      read(k, "rel_tolerance", c.cluster.rel_tolerance);
      read(k, "unit_normalize", c.cluster.unit_normalize);
      if (k.contains("init")) {
        const auto init = k.at("init").get<std::string>();
        if (init == "kmeans++") {
          c.cluster.init = cluster::Init::kKmeansPlusPlus;
        } else if (init == "random") {
          c.cluster.init = cluster::Init::kRandom;
        } else {
          throw Error("config: unknown cluster init \"" + init + "\"");
        }
      }
    }
    if (j.contains("curation")) {
      const json& k = j.at("curation");
      read(k, "noise_threshold", c.curation.noise_threshold);
      read(k, "reference_size", c.curation.reference_size);
    }
    if (j.contains("report")) {
      const json& r = j.at("report");
      read(r, "min_group_size", c.report.evaluation.min_group_size);
      read(r, "min_sample", c.report.evaluation.min_sample);
      read(r, "sample_size", c.report.evaluation.sample_size);
      read(r, "exhaustive", c.report.evaluation.exhaustive);
      read(r, "threshold", c.report.threshold);
    }
  } catch (const json::exception& e) {
    throw Error(std::string("config: ") + e.what());
  }
  if (c.data.entities.empty() && !c.synthetic) {
    throw Error("config: needs data.entities or a synthetic block");
  }
  if (!c.data.entities.empty() && c.data.taxonomy.empty()) {
    throw Error("config: data.entities needs data.taxonomy");
  }
  if (c.workers < 1) throw Error("config: workers must be >= 1");
  c.curation.validate();
  return c;
}

PipelineConfig load_config(const fs::path& path) {
  return parse_config(read_file(path), path.parent_path());
}

std::string config_to_json(const PipelineConfig& c) {
  json j;
  j["work_dir"] = c.work_dir.generic_string();
  j["seed"] = c.seed;
  j["workers"] = c.workers;
  j["data"] = {{"entities", c.data.entities.generic_string()},
               {"taxonomy", c.data.taxonomy.generic_string()},
               {"embeddings", c.data.embeddings.generic_string()},
               {"format", c.data.format == corpus::EntityFormat::kTsv ? "tsv" : "jsonl"}};
  if (c.synthetic) j["synthetic"] = synth_json(*c.synthetic);
  j["features"] = {{"name_len", c.features.limits.name_len},
                   {"desc_len", c.features.limits.desc_len},
                   {"pos", c.features.limits.pos},
                   {"embedding_dim", c.features.embedding_dim},
                   {"pos_dim", c.features.pos_dim},
                   {"trainable", c.features.trainable}};
  j["stage1"] = cnn_json(c.stage1.cnn);
  j["stage1"]["per_class"] = c.stage1.per_class;
  j["stage1"]["split_ratio"] = c.stage1.split_ratio;
  j["stage2"] = cnn_json(c.stage2.cnn);
  j["stage2"]["split_ratio"] = c.stage2.split_ratio;
  j["cluster"] = {{"k", c.cluster.k},
                  {"max_iters", c.cluster.max_iters},
                  {"rel_tolerance", c.cluster.rel_tolerance},
                  {"unit_normalize", c.cluster.unit_normalize},
                  {"init", c.cluster.init == cluster::Init::kRandom ? "random" : "kmeans++"}};
  j["curation"] = {{"noise_threshold", c.curation.noise_threshold},
                   {"reference_size", c.curation.reference_size}};
  const auto& e = c.report.evaluation;
  j["report"] = {{"min_group_size", e.min_group_size},
                 {"min_sample", e.min_sample},
                 {"sample_size", e.sample_size},
                 {"exhaustive", e.exhaustive},
                 {"threshold", c.report.threshold}};
  return j.dump(2) + "\n";
}

// --- Representations --------------------------------------------------------

namespace {

constexpr char kRepMagic[8] = {'D', 'S', 'C', 'N', 'R', 'E', 'P', 'R'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T take(std::string_view data, std::size_t& pos) {
  if (pos + sizeof(T) > data.size()) throw Error("representations: truncated file");
  T v;
  std::memcpy(&v, data.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace

void save_representations(const fs::path& path, const Representations& reps) {
  std::string out(kRepMagic, sizeof(kRepMagic));
  put<uint64_t>(out, reps.ids.size());
  put<uint64_t>(out, static_cast<uint64_t>(reps.values.cols()));
  for (const auto& id : reps.ids) {
    put<uint32_t>(out, static_cast<uint32_t>(id.size()));
    out += id;
  }
  const auto count = static_cast<std::size_t>(reps.values.size());
  out.append(reinterpret_cast<const char*>(reps.values.data()), count * sizeof(double));
  write_file(path, out);
}

Representations load_representations(const fs::path& path) {
  const std::string data = read_file(path);
  Representations reps;
  if (data.size() >= sizeof(kRepMagic) &&
      std::memcmp(data.data(), kRepMagic, sizeof(kRepMagic)) == 0) {
    std::size_t pos = sizeof(kRepMagic);
    const auto n = take<uint64_t>(data, pos);
    const auto dim = take<uint64_t>(data, pos);
    for (uint64_t i = 0; i < n; ++i) {
      const auto len = take<uint32_t>(data, pos);
      if (pos + len > data.size()) throw Error("representations: truncated file");
      reps.ids.emplace_back(data.substr(pos, len));
      pos += len;
    }
    if (data.size() - pos != n * dim * sizeof(double)) {
      throw Error("representations: payload size mismatch");
    }
    reps.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(dim));
    std::memcpy(reps.values.data(), data.data() + pos, n * dim * sizeof(double));
    return reps;
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 0;
  for (const auto& line : split(data, '\n')) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split(line, '\t');
    if (fields.size() < 2) {
      throw Error("representations: line " + std::to_string(line_no) +
                  ": expected id and values");
    }
    std::vector<double> row;
    for (std::size_t f = 1; f < fields.size(); ++f) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(fields[f], &used));
        if (used != fields[f].size()) throw std::invalid_argument("trailing");
      } catch (const std::exception&) {
        throw Error("representations: line " + std::to_string(line_no) +
                    ": bad number \"" + fields[f] + "\"");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error("representations: line " + std::to_string(line_no) +
                  ": dimension mismatch");
    }
    reps.ids.push_back(fields[0]);
    rows.push_back(std::move(row));
  }
  const std::size_t dim = rows.empty() ? 0 : rows.front().size();
  reps.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(dim));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t d = 0; d < dim; ++d) reps.values(i, d) = rows[i][d];
  }
  return reps;
}

// --- Stages -----------------------------------------------------------------

namespace {

struct StageSpec {
  std::string name;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
};

const std::vector<StageSpec>& stage_specs() {
  static const std::vector<StageSpec> specs = {
      {"gen-synth", {}, {"synth_entities.jsonl", "synth_taxonomy.json"}},
      {"prepare", {}, {"prepared.jsonl", "taxonomy.json", "vocab.tsv", "filter_report.csv"}},
      {"train1",
       {"prepared.jsonl", "taxonomy.json", "vocab.tsv"},
       {"model1.ckpt", "train1_split.tsv", "train1_history.csv", "validation_prf.csv"}},
      {"represent", {"model1.ckpt", "prepared.jsonl", "vocab.tsv"}, {"representations.bin"}},
      {"cluster",
       {"representations.bin", "prepared.jsonl", "taxonomy.json"},
       {"clusters.tsv", "cluster_stats.csv", "cluster_cdf.csv", "class_profile.csv",
        "kmeans_history.csv"}},
      {"curate",
       {"clusters.tsv", "prepared.jsonl", "taxonomy.json"},
       {"curated.tsv", "budget.csv", "noise_flags.tsv"}},
      {"train2",
       {"curated.tsv", "prepared.jsonl", "taxonomy.json", "vocab.tsv"},
       {"model2.ckpt", "train2_history.csv"}},
      {"predict", {"model2.ckpt", "prepared.jsonl", "vocab.tsv", "taxonomy.json"},
       {"predictions.tsv"}},
      {"grade", {"predictions.tsv", "clusters.tsv", "prepared.jsonl", "taxonomy.json"},
       {"graded.tsv"}},
      {"report",
       {"graded.tsv", "prepared.jsonl", "taxonomy.json", "validation_prf.csv", "budget.csv"},
       {"groups.csv", "table1.csv", "selected.tsv", "report.txt"}},
  };
  return specs;
}

const StageSpec& find_stage(std::string_view name) {
  for (const auto& s : stage_specs()) {
    if (s.name == name) return s;
  }
  throw Error("unknown stage \"" + std::string(name) + "\"");
}

std::string producer_of(const std::string& artifact) {
  for (const auto& s : stage_specs()) {
    if (std::find(s.outputs.begin(), s.outputs.end(), artifact) != s.outputs.end()) {
      return s.name;
    }
  }
  return "";
}

fs::path resolve(const fs::path& base, const fs::path& p) {
  if (p.empty() || p.is_absolute()) return p;
  return base / p;
}

// Described entities are the ones the classifier sees.
std::vector<std::size_t> described(const corpus::EntityCollection& entities) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < entities.size(); ++i) {
    if (entities[i].description) out.push_back(i);
  }
  return out;
}

std::unordered_map<std::string, std::size_t> index_by_id(
    const corpus::EntityCollection& entities) {
  std::unordered_map<std::string, std::size_t> out;
  for (std::size_t i = 0; i < entities.size(); ++i) out.emplace(entities[i].id, i);
  return out;
}

std::size_t lookup(const std::unordered_map<std::string, std::size_t>& index,
                   const std::string& id, std::string_view artifact) {
  auto it = index.find(id);
  if (it == index.end()) {
    throw Error(std::string(artifact) + ": unknown entity id \"" + id + "\"");
  }
  return it->second;
}

// Rows of a TSV/CSV artifact, header skipped when asked.
std::vector<std::vector<std::string>> read_rows(const fs::path& path, char sep,
                                                bool header) {
  std::vector<std::vector<std::string>> rows;
  bool first = true;
  for (const auto& line : split(read_file(path), '\n')) {
    if (line.empty()) continue;
    if (first && header) {
      first = false;
      continue;
    }
    first = false;
    rows.push_back(split(line, sep));
  }
  return rows;
}

int parse_int(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(std::string(what) + ": bad integer \"" + s + "\"");
}

double parse_double(const std::string& s, std::string_view what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw Error(std::string(what) + ": bad number \"" + s + "\"");
}

std::string timestamp() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

std::string history_csv(const nnet::TrainResult& r) {
  std::string out = "epoch,train_loss,val_loss,val_macro_f1,best\n";
  for (const auto& e : r.history) {
    out += std::to_string(e.epoch) + "," + exact(e.train_loss) + "," +
           exact(e.val_loss) + "," + exact(e.val_macro_f1) + "," +
           (e.epoch == r.best_epoch ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace

const std::vector<std::string>& stage_names() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& s : stage_specs()) n.push_back(s.name);
    return n;
  }();
  return names;
}

Pipeline::Pipeline(PipelineConfig config, RunOptions options)
    : config_(std::move(config)), options_(std::move(options)) {
  if (options_.seed) config_.seed = *options_.seed;
  if (options_.workers) config_.workers = *options_.workers;
  if (config_.workers < 1) throw Error("workers must be >= 1");
  if (options_.work_dir) {
    work_dir_ = *options_.work_dir;
  } else if (const char* env = std::getenv("DESCNET_WORK_DIR"); env && *env) {
    work_dir_ = env;
  } else {
    work_dir_ = resolve(config_.base_dir, config_.work_dir);
  }
  PipelineConfig canonical = config_;
  canonical.work_dir.clear();
  canonical.base_dir.clear();
  config_digest_ = hex64(fnv1a64(config_to_json(canonical)));
}

class StageContext {
 public:
  StageContext(const fs::path& work, std::string stage, bool force)
      : work_(work), stage_(std::move(stage)), force_(force) {}

  fs::path path(const std::string& artifact) const { return work_ / artifact; }

  // Checks an upstream artifact against its producer's manifest.
  void require(const std::string& artifact) {
    const fs::path p = path(artifact);
    const std::string producer = producer_of(artifact);
    if (!fs::exists(p)) {
      throw Error("stage '" + stage_ + "': missing artifact '" + artifact +
                  "' (run '" + producer + "' first)");
    }
    const std::string digest = file_digest(p);
    inputs_[artifact] = digest;
    if (force_) return;
    const fs::path manifest = work_ / "manifests" / (producer + ".json");
    std::string recorded;
    if (fs::exists(manifest)) {
      try {
        const json m = json::parse(read_file(manifest));
        recorded = m.at("outputs").value(artifact, std::string());
      } catch (const json::exception&) {
      }
    }
    if (recorded != digest) {
      throw Error("stage '" + stage_ + "': artifact '" + artifact +
                  "' does not match the manifest of stage '" + producer +
                  "' (rerun it or pass --force)");
    }
  }

  void external(const std::string& key, const fs::path& p) {
    if (!fs::exists(p)) {
      throw Error("stage '" + stage_ + "': missing input " + key + " '" +
                  p.string() + "'");
    }
    inputs_[key] = file_digest(p);
  }

  void write(const std::string& artifact, std::string_view data) {
    write_file(path(artifact), data);
  }

  void finish(const StageSpec& spec, const std::string& config_digest,
              uint64_t seed) {
    ojson m;
    m["stage"] = stage_;
    m["config_digest"] = config_digest;
    m["seed"] = hex64(seed);
    m["inputs"] = ojson::object();
    for (const auto& [k, v] : inputs_) m["inputs"][k] = v;
    m["outputs"] = ojson::object();
    for (const auto& out : spec.outputs) m["outputs"][out] = file_digest(path(out));
    fs::create_directories(work_ / "manifests");
    write_file(work_ / "manifests" / (stage_ + ".json"), m.dump(2) + "\n");
  }

 private:
  fs::path work_;
  std::string stage_;
  bool force_;
  std::map<std::string, std::string> inputs_;
};

void Pipeline::run(std::string_view stage) {
  const StageSpec& spec = find_stage(stage);
  fs::create_directories(work_dir_);
  StageContext ctx(work_dir_, spec.name, options_.force);
  for (const auto& in : spec.inputs) ctx.require(in);
  const std::string started = timestamp();
  const auto t0 = std::chrono::steady_clock::now();
  if (options_.log) *options_.log << "[" << spec.name << "] start\n" << std::flush;
  try {
    if (spec.name == "gen-synth") gen_synth(ctx);
    else if (spec.name == "prepare") prepare(ctx);
    else if (spec.name == "train1") train1(ctx);
    else if (spec.name == "represent") represent(ctx);
    else if (spec.name == "cluster") cluster(ctx);
    else if (spec.name == "curate") curate(ctx);
    else if (spec.name == "train2") train2(ctx);
    else if (spec.name == "predict") predict(ctx);
    else if (spec.name == "grade") grade(ctx);
    else report(ctx);
  } catch (const Error& e) {
    throw Error("stage '" + spec.name + "': " + e.what());
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ctx.finish(spec, config_digest_, derive_seed(config_.seed, spec.name));
  // Wall-clock data goes to a sidecar outside the manifest.
  fs::create_directories(work_dir_ / "timings");
  ojson t = {{"stage", spec.name},
             {"started", started},
             {"finished", timestamp()},
             {"seconds", seconds}};
  write_file(work_dir_ / "timings" / (spec.name + ".json"), t.dump(2) + "\n");
  if (options_.log) {
    *options_.log << "[" << spec.name << "] done in " << fixed(seconds, 2) << " s\n"
                  << std::flush;
  }
}

void Pipeline::run_all() {
  for (const auto& name : stage_names()) {
    if (name == "gen-synth" && !(config_.synthetic && config_.data.entities.empty())) {
      continue;
    }
    run(name);
  }
}

// --- Stage bodies -----------------------------------------------------------

namespace {

struct Loaded {
  corpus::EntityCollection entities;
  corpus::Taxonomy taxonomy;
  std::vector<int> labels;  // kUnlabeled for unknown entities
};

Loaded load_prepared(const StageContext& ctx) {
  Loaded l;
  l.entities = corpus::load_entities(ctx.path("prepared.jsonl"), corpus::EntityFormat::kJsonl);
  l.taxonomy = corpus::load_taxonomy(ctx.path("taxonomy.json"));
  l.labels = corpus::bind_labels(l.entities, l.taxonomy);
  return l;
}

features::Vocabulary load_vocab(const StageContext& ctx) {
  return features::Vocabulary::parse(read_file(ctx.path("vocab.tsv")));
}

std::vector<std::string> class_ids(const corpus::Taxonomy& t) {
  std::vector<std::string> out;
  for (int c = 0; c < t.class_count(); ++c) out.push_back(t.class_id(c));
  return out;
}

void log_line(std::ostream* log, const std::string& stage, const std::string& msg) {
  if (log) *log << "[" << stage << "] " << msg << "\n" << std::flush;
}

}  // namespace

void Pipeline::gen_synth(StageContext& ctx) {
  if (!config_.synthetic) throw Error("config has no synthetic block");
  corpus::SynthSpec spec = *config_.synthetic;
  spec.seed = derive_seed(config_.seed, derive_seed(spec.seed, "gen-synth"));
  const corpus::SynthCorpus corpus = corpus::gen_synthetic(spec);
  corpus::save_entities(ctx.path("synth_entities.jsonl"), corpus.entities);
  ctx.write("synth_taxonomy.json", corpus::format_taxonomy_json(corpus.taxonomy));
  log_line(options_.log, "gen-synth",
           std::to_string(corpus.entities.size()) + " entities, " +
               std::to_string(corpus.taxonomy.class_count()) + " classes");
}

void Pipeline::prepare(StageContext& ctx) {
  fs::path entities_path, taxonomy_path;
  corpus::EntityFormat format = config_.data.format;
  if (config_.data.entities.empty()) {
    ctx.require("synth_entities.jsonl");
    ctx.require("synth_taxonomy.json");
    entities_path = ctx.path("synth_entities.jsonl");
    taxonomy_path = ctx.path("synth_taxonomy.json");
    format = corpus::EntityFormat::kJsonl;
  } else {
    entities_path = resolve(config_.base_dir, config_.data.entities);
    taxonomy_path = resolve(config_.base_dir, config_.data.taxonomy);
    ctx.external("entities", entities_path);
    ctx.external("taxonomy", taxonomy_path);
  }
  corpus::EntityCollection entities = corpus::load_entities(entities_path, format);
  const corpus::Taxonomy taxonomy = corpus::load_taxonomy(taxonomy_path);
  corpus::bind_labels(entities, taxonomy);
  corpus::bind_audit_labels(entities, taxonomy);

  const corpus::PosHeadAnalyzer analyzer;
  std::string report = "id,accepted,rule\n";
  std::size_t accepted = 0;
  for (auto& e : entities) {
    e.description.reset();
    const corpus::FilterVerdict v = corpus::accept_description(e, analyzer);
    accepted += v.accepted;
    report += e.id + "," + (v.accepted ? "1" : "0") + "," +
              std::string(corpus::rule_name(v.rule)) + "\n";
  }
  const features::Vocabulary vocab =
      features::build_vocabulary(entities, config_.features.limits);
  corpus::save_entities(ctx.path("prepared.jsonl"), entities);
  ctx.write("taxonomy.json", corpus::format_taxonomy_json(taxonomy));
  ctx.write("vocab.tsv", vocab.serialize());
  ctx.write("filter_report.csv", report);
  log_line(options_.log, "prepare",
           std::to_string(accepted) + " of " + std::to_string(entities.size()) +
               " entities described; vocabulary " + std::to_string(vocab.size()));
}

namespace {

features::EmbeddingTable make_embeddings(const PipelineConfig& config,
                                         const features::Vocabulary& vocab,
                                         StageContext& ctx) {
  const uint64_t oov_seed = derive_seed(config.seed, "oov");
  int dim = config.features.embedding_dim;
  std::optional<features::Pretrained> pretrained;
  if (!config.data.embeddings.empty()) {
    const fs::path p = resolve(config.base_dir, config.data.embeddings);
    ctx.external("embeddings", p);
    pretrained = features::load_pretrained(p, oov_seed);
    dim = pretrained->table.dim();
  }
  const int pos_dim = config.features.limits.pos ? config.features.pos_dim : 0;
  features::EmbeddingTable table = features::build_embedding_table(
      vocab, dim, pos_dim, oov_seed, pretrained ? &*pretrained : nullptr);
  table.trainable = config.features.trainable;
  return table;
}

std::vector<nnet::Example> make_examples(const corpus::EntityCollection& entities,
                                         std::span<const std::size_t> rows,
                                         std::span<const int> labels,
                                         const features::Vocabulary& vocab,
                                         const features::ChannelLimits& limits) {
  std::vector<nnet::Example> out;
  out.reserve(rows.size());
  for (std::size_t r : rows) {
    out.push_back({features::channelize(entities[r], vocab, limits), labels[r]});
  }
  return out;
}

std::string prf_csv(const confidence::PrfReport& r, std::span<const std::string> ids) {
  std::string out = "class,precision,recall,f1,support,predicted\n";
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    const auto& m = r.per_class[c];
    out += ids[c] + "," + fixed(m.precision) + "," + fixed(m.recall) + "," +
           fixed(m.f1) + "," + std::to_string(m.support) + "," +
           std::to_string(m.predicted) + "\n";
  }
  out += "macro," + fixed(r.macro_precision) + "," + fixed(r.macro_recall) + "," +
         fixed(r.macro_f1) + ",,\n";
  return out;
}

nnet::CnnConfig stage_cnn(nnet::CnnConfig cnn, const PipelineConfig& config,
                          int class_count, uint64_t stage_seed) {
  cnn.class_count = class_count;
  cnn.workers = config.workers;
  cnn.seed = derive_seed(stage_seed, "train");
  return cnn;
}

}  // namespace

void Pipeline::train1(StageContext& ctx) {
  const Loaded l = load_prepared(ctx);
  const features::Vocabulary vocab = load_vocab(ctx);
  const uint64_t seed = derive_seed(config_.seed, "train1");
  const int classes = l.taxonomy.class_count();

  // Balanced pool over the described known entities.
  const auto rows = described(l.entities);
  std::vector<int> pool_labels;
  for (std::size_t r : rows) pool_labels.push_back(l.labels[r]);
  const std::vector<int> picked = curation::sample_balanced(
      pool_labels, classes, config_.stage1.per_class, derive_seed(seed, "sample"));
  std::vector<std::size_t> sample;
  std::vector<int> sample_labels;
  for (int p : picked) {
    sample.push_back(rows[p]);
    sample_labels.push_back(pool_labels[p]);
  }
  const corpus::Split split = corpus::split_stratified(
      sample_labels, config_.stage1.split_ratio, derive_seed(seed, "split"));
  std::vector<std::size_t> train_rows, val_rows;
  std::string split_tsv = "id\tlabel\tpart\n";
  for (std::size_t i : split.train) train_rows.push_back(sample[i]);
  for (std::size_t i : split.validation) val_rows.push_back(sample[i]);
  for (std::size_t r : train_rows) {
    split_tsv += l.entities[r].id + "\t" + *l.entities[r].label + "\ttrain\n";
  }
  for (std::size_t r : val_rows) {
    split_tsv += l.entities[r].id + "\t" + *l.entities[r].label + "\tvalidation\n";
  }

  const auto limits = config_.features.limits;
  const auto train_set = make_examples(l.entities, train_rows, l.labels, vocab, limits);
  const auto val_set = make_examples(l.entities, val_rows, l.labels, vocab, limits);
  const nnet::CnnConfig cnn = stage_cnn(config_.stage1.cnn, config_, classes, seed);
  nnet::CnnModel model = nnet::init_model(cnn, make_embeddings(config_, vocab, ctx),
                                          vocab.hash(), derive_seed(seed, "init"));
  log_line(options_.log, "train1",
           std::to_string(train_set.size()) + " train / " +
               std::to_string(val_set.size()) + " validation");
  const nnet::TrainResult result = nnet::train(model, train_set, val_set);

  std::vector<int> predicted, gold;
  for (const auto& ex : val_set) {
    predicted.push_back(nnet::predict(model, ex.input).label);
    gold.push_back(ex.label);
  }
  const confidence::PrfReport prf = confidence::macro_prf(predicted, gold, classes);
  nnet::save_model(model, ctx.path("model1.ckpt"));
  ctx.write("train1_split.tsv", split_tsv);
  ctx.write("train1_history.csv", history_csv(result));
  ctx.write("validation_prf.csv", prf_csv(prf, class_ids(l.taxonomy)));
  log_line(options_.log, "train1",
           "best epoch " + std::to_string(result.best_epoch) + ", validation macro-F1 " +
               fixed(prf.macro_f1, 4));
}

void Pipeline::represent(StageContext& ctx) {
  const corpus::EntityCollection entities =
      corpus::load_entities(ctx.path("prepared.jsonl"), corpus::EntityFormat::kJsonl);
  const features::Vocabulary vocab = load_vocab(ctx);
  const nnet::CnnModel model = nnet::load_model(ctx.path("model1.ckpt"));
  if (model.vocab_hash != vocab.hash()) {
    throw Error("model1.ckpt was trained with a different vocabulary");
  }
  const auto rows = described(entities);
  Representations reps;
  reps.values.resize(static_cast<Eigen::Index>(rows.size()),
                     model.config.representation_dim());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto input = features::channelize(entities[rows[i]], vocab, config_.features.limits);
    reps.ids.push_back(entities[rows[i]].id);
    reps.values.row(static_cast<Eigen::Index>(i)) = nnet::represent(model, input).transpose();
  }
  save_representations(ctx.path("representations.bin"), reps);
  log_line(options_.log, "represent", std::to_string(rows.size()) + " entities");
}

void Pipeline::cluster(StageContext& ctx) {
  const Loaded l = load_prepared(ctx);
  const Representations reps = load_representations(ctx.path("representations.bin"));
  const auto index = index_by_id(l.entities);
  std::vector<int> labels;
  for (const auto& id : reps.ids) labels.push_back(l.labels[lookup(index, id, "representations")]);

  cluster::ClusterConfig cfg = config_.cluster;
  cfg.seed = derive_seed(config_.seed, "cluster");
  cfg.workers = config_.workers;
  const cluster::Clustering c = cluster::kmeans_fit(reps.values, cfg);
  const int classes = l.taxonomy.class_count();
  const auto ids = class_ids(l.taxonomy);

  std::string assign = "id\tcluster\n";
  for (std::size_t i = 0; i < reps.ids.size(); ++i) {
    assign += reps.ids[i] + "\t" + std::to_string(c.assignments[i]) + "\n";
  }
  const cluster::ClusterStats stats = cluster::cluster_stats(c.assignments, labels, cfg.k, classes);
  std::string stats_csv = "cluster,size,known,entropy_bits,largest_share,largest_class\n";
  for (int j = 0; j < cfg.k; ++j) {
    const auto& s = stats.clusters[j];
    stats_csv += std::to_string(j) + "," + std::to_string(s.size) + "," +
                 std::to_string(s.known) + "," + fixed(s.entropy_bits) + "," +
                 fixed(s.largest_share) + "," +
                 (s.largest_class >= 0 ? ids[s.largest_class] : std::string()) + "\n";
  }
  std::string cdf = "metric,value,cdf\n";
  auto add_cdf = [&](const char* name, const cluster::Distribution& d) {
    for (std::size_t i = 0; i < d.values.size(); ++i) {
      cdf += std::string(name) + "," + fixed(d.values[i]) + "," + fixed(d.cdf[i]) + "\n";
    }
  };
  add_cdf("size", stats.size);
  add_cdf("entropy_bits", stats.entropy);
  add_cdf("largest_share", stats.largest_share);
  std::string profile = "class,clusters,min,q1,median,q3,max\n";
  const auto profiles = cluster::class_cluster_profile(c.assignments, labels, cfg.k, classes);
  for (int k = 0; k < classes; ++k) {
    const auto& q = profiles[k].summary;
    profile += ids[k] + "," + std::to_string(profiles[k].counts.size()) + "," +
               fixed(q.min, 2) + "," + fixed(q.q1, 2) + "," + fixed(q.median, 2) + "," +
               fixed(q.q3, 2) + "," + fixed(q.max, 2) + "\n";
  }
  std::string history = "iteration,objective\n";
  for (std::size_t i = 0; i < c.objective_history.size(); ++i) {
    history += std::to_string(i + 1) + "," + exact(c.objective_history[i]) + "\n";
  }
  ctx.write("clusters.tsv", assign);
  ctx.write("cluster_stats.csv", stats_csv);
  ctx.write("cluster_cdf.csv", cdf);
  ctx.write("class_profile.csv", profile);
  ctx.write("kmeans_history.csv", history);
  log_line(options_.log, "cluster",
           std::to_string(c.iterations_run) + " iterations, objective " + fixed(c.objective, 4));
}

namespace {

// Cluster id per prepared entity; -1 for entities absent from clusters.tsv.
std::vector<int> load_assignments(const StageContext& ctx, const Loaded& l, int* k) {
  const auto index = index_by_id(l.entities);
  std::vector<int> out(l.entities.size(), -1);
  int max_cluster = -1;
  for (const auto& row : read_rows(ctx.path("clusters.tsv"), '\t', true)) {
    if (row.size() != 2) throw Error("clusters.tsv: expected id and cluster");
    const int c = parse_int(row[1], "clusters.tsv");
    if (c < 0) throw Error("clusters.tsv: negative cluster id");
    out[lookup(index, row[0], "clusters.tsv")] = c;
    max_cluster = std::max(max_cluster, c);
  }
  *k = max_cluster + 1;
  return out;
}

}  // namespace

void Pipeline::curate(StageContext& ctx) {
  const Loaded l = load_prepared(ctx);
  int k = 0;
  const std::vector<int> assignment = load_assignments(ctx, l, &k);
  // Curation sees the clustered known entities only.
  std::vector<std::size_t> rows;
  std::vector<int> a, labels;
  for (std::size_t i = 0; i < l.entities.size(); ++i) {
    if (assignment[i] < 0 || l.labels[i] < 0) continue;
    rows.push_back(i);
    a.push_back(assignment[i]);
    labels.push_back(l.labels[i]);
  }
  curation::CurationConfig cfg = config_.curation;
  cfg.seed = derive_seed(config_.seed, "curate");
  const int classes = l.taxonomy.class_count();
  const curation::CuratedSet set = curation::curate(a, labels, k, classes, cfg);
  const auto ids = class_ids(l.taxonomy);

  std::string curated = "id\tlabel\tcluster\n";
  for (int s : set.selected) {
    curated += l.entities[rows[s]].id + "\t" + ids[labels[s]] + "\t" +
               std::to_string(a[s]) + "\n";
  }
  std::string flags = "id\tlabel\tcluster\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!set.flags.flagged[i]) continue;
    flags += l.entities[rows[i]].id + "\t" + ids[labels[i]] + "\t" + std::to_string(a[i]) + "\n";
  }
  ctx.write("curated.tsv", curated);
  ctx.write("budget.csv", curation::format_budget_csv(set.budget, ids));
  ctx.write("noise_flags.tsv", flags);
  log_line(options_.log, "curate",
           std::to_string(set.flags.flagged_count()) + " flagged, " +
               std::to_string(set.selected.size()) + " selected");
}

void Pipeline::train2(StageContext& ctx) {
  const Loaded l = load_prepared(ctx);
  const features::Vocabulary vocab = load_vocab(ctx);
  const uint64_t seed = derive_seed(config_.seed, "train2");
  const int classes = l.taxonomy.class_count();
  const auto index = index_by_id(l.entities);
  std::vector<std::size_t> rows;
  std::vector<int> labels;
  for (const auto& row : read_rows(ctx.path("curated.tsv"), '\t', true)) {
    if (row.size() != 3) throw Error("curated.tsv: expected id, label and cluster");
    const std::size_t r = lookup(index, row[0], "curated.tsv");
    if (l.labels[r] < 0 || l.taxonomy.class_id(l.labels[r]) != row[1]) {
      throw Error("curated.tsv: label of \"" + row[0] + "\" disagrees with prepared.jsonl");
    }
    if (!l.entities[r].description) {
      throw Error("curated.tsv: \"" + row[0] + "\" has no description");
    }
    rows.push_back(r);
    labels.push_back(l.labels[r]);
  }
  const corpus::Split split = corpus::split_stratified(
      labels, config_.stage2.split_ratio, derive_seed(seed, "split"));
  std::vector<std::size_t> train_rows, val_rows;
  for (std::size_t i : split.train) train_rows.push_back(rows[i]);
  for (std::size_t i : split.validation) val_rows.push_back(rows[i]);
  const auto limits = config_.features.limits;
  const auto train_set = make_examples(l.entities, train_rows, l.labels, vocab, limits);
  const auto val_set = make_examples(l.entities, val_rows, l.labels, vocab, limits);
  const nnet::CnnConfig cnn = stage_cnn(config_.stage2.cnn, config_, classes, seed);
  nnet::CnnModel model = nnet::init_model(cnn, make_embeddings(config_, vocab, ctx),
                                          vocab.hash(), derive_seed(seed, "init"));
  log_line(options_.log, "train2",
           std::to_string(train_set.size()) + " train / " +
               std::to_string(val_set.size()) + " validation");
  const nnet::TrainResult result = nnet::train(model, train_set, val_set);
  nnet::save_model(model, ctx.path("model2.ckpt"));
  ctx.write("train2_history.csv", history_csv(result));
  log_line(options_.log, "train2",
           "best epoch " + std::to_string(result.best_epoch) + ", validation macro-F1 " +
               fixed(result.best_val_macro_f1, 4));
}

void Pipeline::predict(StageContext& ctx) {
  const Loaded l = load_prepared(ctx);
  const features::Vocabulary vocab = load_vocab(ctx);
  const nnet::CnnModel model = nnet::load_model(ctx.path("model2.ckpt"));
  if (model.vocab_hash != vocab.hash()) {
    throw Error("model2.ckpt was trained with a different vocabulary");
  }
  if (model.config.class_count != l.taxonomy.class_count()) {
    throw Error("model2.ckpt class count differs from the taxonomy");
  }
  std::string out = "id\tclass\tprob\n";
  std::size_t n = 0;
  for (std::size_t i = 0; i < l.entities.size(); ++i) {
    if (l.labels[i] >= 0 || !l.entities[i].description) continue;
    const auto input = features::channelize(l.entities[i], vocab, config_.features.limits);
    const nnet::Prediction p = nnet::predict(model, input);
    out += l.entities[i].id + "\t" + l.taxonomy.class_id(p.label) + "\t" + exact(p.prob) + "\n";
    ++n;
  }
  ctx.write("predictions.tsv", out);
  log_line(options_.log, "predict", std::to_string(n) + " unknown entities");
}

void Pipeline::grade(StageContext& ctx) {
  const Loaded l = load_prepared(ctx);
  int k = 0;
  const std::vector<int> assignment = load_assignments(ctx, l, &k);
  const auto index = index_by_id(l.entities);
  const int classes = l.taxonomy.class_count();

  struct Row {
    std::size_t entity;
    int label;
    double prob;
  };
  std::vector<Row> preds;
  std::vector<int> predicted(l.entities.size(), -1);
  for (const auto& row : read_rows(ctx.path("predictions.tsv"), '\t', true)) {
    if (row.size() != 3) throw Error("predictions.tsv: expected id, class and prob");
    const std::size_t r = lookup(index, row[0], "predictions.tsv");
    const auto c = l.taxonomy.class_index(row[1]);
    if (!c) throw Error("predictions.tsv: unknown class \"" + row[1] + "\"");
    if (assignment[r] < 0) throw Error("predictions.tsv: \"" + row[0] + "\" is not clustered");
    preds.push_back({r, *c, parse_double(row[2], "predictions.tsv")});
    predicted[r] = *c;
  }
  std::vector<int> a, known, pred;
  for (std::size_t i = 0; i < l.entities.size(); ++i) {
    if (assignment[i] < 0) continue;
    a.push_back(assignment[i]);
    known.push_back(l.labels[i]);
    pred.push_back(l.labels[i] >= 0 ? -1 : predicted[i]);
  }
  const auto comps = confidence::compositions(a, known, pred, k, classes);
  std::string out = "id\tclass\tprob\tcluster\tlevel\tshare\n";
  for (const Row& p : preds) {
    const int cl = assignment[p.entity];
    const confidence::GradedPrediction g =
        confidence::grade(l.entities[p.entity].id, p.label, p.prob, cl, comps[cl]);
    out += g.id + "\t" + l.taxonomy.class_id(g.label) + "\t" + exact(g.prob) + "\t" +
           std::to_string(g.cluster) + "\t" + confidence::level_name(g.level) + "\t" +
           exact(g.share) + "\n";
  }
  ctx.write("graded.tsv", out);
  log_line(options_.log, "grade", std::to_string(preds.size()) + " predictions graded");
}

namespace {

std::vector<confidence::GradedPrediction> load_graded(const fs::path& path,
                                                      const corpus::Taxonomy& taxonomy) {
  std::vector<confidence::GradedPrediction> out;
  for (const auto& row : read_rows(path, '\t', true)) {
    if (row.size() != 6) throw Error("graded.tsv: expected 6 columns");
    confidence::GradedPrediction g;
    g.id = row[0];
    const auto c = taxonomy.class_index(row[1]);
    if (!c) throw Error("graded.tsv: unknown class \"" + row[1] + "\"");
    g.label = *c;
    g.prob = parse_double(row[2], "graded.tsv");
    g.cluster = parse_int(row[3], "graded.tsv");
    g.level = confidence::parse_level(row[4]);
    g.share = parse_double(row[5], "graded.tsv");
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace

void Pipeline::report(StageContext& ctx) {
  const Loaded l = load_prepared(ctx);
  const auto graded = load_graded(ctx.path("graded.tsv"), l.taxonomy);
  const auto index = index_by_id(l.entities);
  const auto ids = class_ids(l.taxonomy);
  const int classes = l.taxonomy.class_count();

  // Gold labels exist only when every graded entity carries an audit label.
  const std::vector<int> audit = corpus::bind_audit_labels(l.entities, l.taxonomy);
  std::vector<int> gold;
  bool have_gold = true;
  for (const auto& g : graded) {
    const int a = audit[lookup(index, g.id, "graded.tsv")];
    have_gold = have_gold && a >= 0;
    gold.push_back(a);
  }

  confidence::EvaluationConfig eval = config_.report.evaluation;
  eval.seed = derive_seed(config_.seed, "report");
  const double threshold = config_.report.threshold;
  std::vector<confidence::Group> groups = confidence::group_predictions(graded);
  std::vector<confidence::ClassEstimate> estimates;
  if (have_gold) {
    confidence::evaluate_groups(groups, graded, gold, l.taxonomy, eval);
    estimates = confidence::estimate_classes(groups, graded, gold, l.taxonomy, eval, threshold);
  }

  std::string groups_csv = "class,level,n_i,p_i,evaluated\n";
  for (const auto& g : groups) {
    groups_csv += ids[g.label] + "," + confidence::level_name(g.level) + "," +
                  std::to_string(g.size()) + "," +
                  (g.evaluated ? fixed(g.precision, 4) : std::string()) + "," +
                  (g.evaluated ? "1" : "0") + "\n";
  }
  std::string table = "class,predictions,m,r,p1,p2,accepted\n";
  for (const auto& e : estimates) {
    table += ids[e.label] + "," + std::to_string(e.predictions) + "," +
             std::to_string(e.m) + "," + std::to_string(e.r) + "," +
             (e.p1 ? fixed(*e.p1, 4) : std::string()) + "," +
             (e.p2 ? fixed(*e.p2, 4) : std::string()) + "," +
             std::to_string(e.accepted) + "\n";
  }
  const std::vector<int> selected = confidence::select_groups(groups, threshold);
  std::string selected_tsv = "id\tclass\tlevel\n";
  for (int i : selected) {
    selected_tsv += graded[i].id + "\t" + ids[graded[i].label] + "\t" +
                    confidence::level_name(graded[i].level) + "\n";
  }

  // Plain-text summary.
  std::string text;
  auto line = [&](const std::string& s) { text += s + "\n"; };
  std::size_t known = 0, described_count = 0;
  for (std::size_t i = 0; i < l.entities.size(); ++i) {
    known += l.labels[i] >= 0;
    described_count += l.entities[i].description.has_value();
  }
  line("entities: " + std::to_string(l.entities.size()));
  line("described: " + std::to_string(described_count));
  line("known: " + std::to_string(known));
  line("classes: " + std::to_string(classes));
  line("config digest: " + config_digest_);
  for (const auto& row : read_rows(ctx.path("validation_prf.csv"), ',', true)) {
    if (!row.empty() && row[0] == "macro" && row.size() >= 4) {
      line("stage-1 validation macro P/R/F1: " + row[1] + " / " + row[2] + " / " + row[3]);
    }
  }
  int64_t curated = 0;
  for (const auto& row : read_rows(ctx.path("budget.csv"), ',', true)) {
    if (row.size() == 7) curated += parse_int(row[6], "budget.csv");
  }
  line("curated training entities: " + std::to_string(curated));
  line("graded predictions: " + std::to_string(graded.size()));
  std::array<int64_t, 7> by_level{};
  std::array<int64_t, 7> correct_by_level{};
  for (std::size_t i = 0; i < graded.size(); ++i) {
    const int lv = static_cast<int>(graded[i].level);
    ++by_level[lv];
    if (have_gold) {
      correct_by_level[lv] += confidence::other_credit(graded[i].label, gold[i], l.taxonomy);
    }
  }
  for (int lv = 1; lv <= 6; ++lv) {
    std::string s = "level L" + std::to_string(lv) + ": " + std::to_string(by_level[lv]);
    if (have_gold && by_level[lv] > 0) {
      s += " (realized precision " +
           fixed(static_cast<double>(correct_by_level[lv]) / by_level[lv], 4) + ")";
    }
    line(s);
  }
  int evaluated = 0;
  for (const auto& g : groups) evaluated += g.evaluated;
  line("groups: " + std::to_string(groups.size()) + " (" + std::to_string(evaluated) +
       " evaluated, " + (eval.exhaustive ? "exhaustive" : "sampled") + ")");
  if (evaluated > 0) line("p2 over evaluated groups: " + fixed(confidence::estimate_p2(groups), 4));
  line("selected at threshold " + fixed(threshold, 2) + ": " + std::to_string(selected.size()));
  if (have_gold && !selected.empty()) {
    int64_t ok = 0;
    for (int i : selected) ok += confidence::other_credit(graded[i].label, gold[i], l.taxonomy);
    line("selection realized precision: " +
         fixed(static_cast<double>(ok) / static_cast<double>(selected.size()), 4));
  }
  if (!have_gold) line("no audit labels: groups left unevaluated");

  ctx.write("groups.csv", groups_csv);
  ctx.write("table1.csv", table);
  ctx.write("selected.tsv", selected_tsv);
  ctx.write("report.txt", text);
  log_line(options_.log, "report", std::to_string(selected.size()) + " entities selected");
}

}  // namespace descnet::pipeline
