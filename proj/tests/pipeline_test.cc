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

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "descnet/pipeline.h"
#include "descnet/random.h"
#include "descnet/text.h"
#include "doctest.h"

namespace descnet::pipeline {
namespace {

constexpr const char* kTinyConfig = R"({
  "seed": 7,
  "synthetic": {
    "class_count": 4,
    "min_class_size": 60,
    "max_class_size": 240,
    "vocab_per_class": 12,
    "shared_vocab": 40,
    "noise_rate": 0.05,
    "unknown_fraction": 0.3
  },
  "features": {"name_len": 8, "desc_len": 16, "embedding_dim": 8, "pos_dim": 4},
  "stage1": {"feature_maps": 6, "hidden_dim": 12, "batch_size": 32, "epochs": 2,
             "per_class": 50},
  "stage2": {"feature_maps": 6, "hidden_dim": 12, "batch_size": 32, "epochs": 2},
  "cluster": {"k": 6},
  "curation": {"reference_size": 40},
  "report": {"min_group_size": 10, "sample_size": 5}
})";

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("descnet_pipeline_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct Shell {
  int status;
  std::string output;
};

Shell shell(const std::string& command) {
  Shell r{0, ""};
  FILE* pipe = popen((command + " 2>&1").c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[512];
  while (fgets(buf, sizeof(buf), pipe)) r.output += buf;
  r.status = pclose(pipe);
  return r;
}

TEST_CASE("config parsing applies defaults and round-trips") {
  const PipelineConfig c = parse_config(kTinyConfig, "/base");
  CHECK(c.seed == 7);
  CHECK(c.synthetic.has_value());
  CHECK(c.synthetic->class_count == 4);
  CHECK(c.cluster.k == 6);
  CHECK(c.cluster.max_iters == 100);
  CHECK(c.curation.noise_threshold == 0.05);
  CHECK(c.curation.reference_size == 40);
  CHECK(c.stage1.split_ratio == 0.7);
  CHECK(c.stage2.split_ratio == 0.9);
  CHECK(c.report.threshold == 0.94);
  CHECK(c.report.evaluation.sample_size == 5);
  CHECK(c.features.limits.name_len == 8);

  const std::string json = config_to_json(c);
  const PipelineConfig again = parse_config(json, "/base");
  CHECK(config_to_json(again) == json);
}

TEST_CASE("config errors") {
  CHECK_THROWS_AS(parse_config("{", "."), Error);
  CHECK_THROWS_AS(parse_config(R"({"cluster": {"k": 0}})", "."), Error);
  CHECK_THROWS_AS(parse_config(R"({"curation": {"noise_threshold": 2}})", "."), Error);
  CHECK_THROWS_AS(load_config("/nonexistent/descnet.json"), Error);
}

TEST_CASE("config digest ignores the work directory") {
  const PipelineConfig c = parse_config(kTinyConfig, ".");
  RunOptions a, b;
  a.work_dir = scratch("digest_a");
  b.work_dir = scratch("digest_b");
  CHECK(Pipeline(c, a).config_digest() == Pipeline(c, b).config_digest());
  RunOptions s = a;
  s.seed = 8;
  CHECK(Pipeline(c, s).config_digest() != Pipeline(c, a).config_digest());
}

TEST_CASE("representations round trip") {
  const fs::path dir = scratch("reps");
  Representations r;
  r.ids = {"a", "b b", "c"};
  r.values.resize(3, 4);
  Rng rng(3);
  for (Eigen::Index i = 0; i < r.values.size(); ++i) r.values.data()[i] = rng.uniform() - 0.5;
  save_representations(dir / "r.bin", r);
  const Representations back = load_representations(dir / "r.bin");
  CHECK(back.ids == r.ids);
  CHECK(back.values == r.values);

  std::ofstream(dir / "r.tsv") << "x\t1\t2\ny\t3\t4.5\n";
  const Representations tsv = load_representations(dir / "r.tsv");
  CHECK(tsv.ids == std::vector<std::string>{"x", "y"});
  CHECK(tsv.values(1, 1) == 4.5f);
}

TEST_CASE("stages check artifacts and manifests") {
  const PipelineConfig c = parse_config(kTinyConfig, ".");
  RunOptions o;
  o.work_dir = scratch("stages");
  Pipeline p(c, o);
  try {
    p.run("train2");
    FAIL("train2 ran without its inputs");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("missing artifact") != std::string::npos);
  }
  CHECK_THROWS_AS(p.run("no-such-stage"), Error);

  p.run_all();
  for (const auto& s : stage_names()) {
    CHECK(fs::exists(p.work_dir() / "manifests" / (s + ".json")));
  }
  CHECK(fs::exists(p.work_dir() / "report.txt"));
  CHECK(slurp(p.work_dir() / "table1.csv").rfind("class,predictions,m,r,p1,p2,accepted", 0) == 0);

  // A stage rerun reproduces its outputs exactly.
  const std::string clusters = slurp(p.work_dir() / "clusters.tsv");
  p.run("cluster");
  CHECK(slurp(p.work_dir() / "clusters.tsv") == clusters);

  std::ofstream(p.work_dir() / "curated.tsv", std::ios::app) << "tampered\t0\t0\n";
  try {
    p.run("train2");
    FAIL("tampered artifact accepted");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("does not match the manifest of stage 'curate'") !=
          std::string::npos);
  }
  RunOptions forced = o;
  forced.force = true;
  CHECK_THROWS_AS(Pipeline(c, forced).run("train2"), Error);  // unknown id
  p.run("curate");
  CHECK_NOTHROW(p.run("train2"));
}

TEST_CASE("command line") {
  const char* cli = std::getenv("DESCNET_CLI");
  if (cli == nullptr) {
    MESSAGE("DESCNET_CLI not set; skipping");
    return;
  }
  const fs::path dir = scratch("cli");
  std::ofstream(dir / "tiny.json") << kTinyConfig;
  const std::string base = std::string(cli) + " ";
  const std::string cfg = " --config " + (dir / "tiny.json").string() + " --quiet";
  setenv("DESCNET_WORK_DIR", (dir / "work").c_str(), 1);

  const Shell missing = shell(base + "train2" + cfg);
  CHECK(missing.status != 0);
  CHECK(missing.output.find("descnet: ") != std::string::npos);
  CHECK(missing.output.find("curated.tsv") != std::string::npos);

  const Shell bad = shell(base + "cluster --config /nonexistent.json");
  CHECK(bad.status != 0);

  const Shell all = shell(base + "run-all" + cfg);
  INFO(all.output);
  CHECK(all.status == 0);
  CHECK(fs::exists(dir / "work" / "selected.tsv"));
  unsetenv("DESCNET_WORK_DIR");
}

}  // namespace
}  // namespace descnet::pipeline
