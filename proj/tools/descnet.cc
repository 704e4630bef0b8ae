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

// Command-line driver for the pipeline stages.

#include <cstdint>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "descnet/pipeline.h"
#include "descnet/text.h"

int main(int argc, char** argv) {
  CLI::App app{"Entity typing over a concept taxonomy"};
  app.require_subcommand(1);

  std::string config_path;
  uint64_t seed = 0;
  int workers = 0;
  bool force = false;
  bool quiet = false;
  for (const auto& name : descnet::pipeline::stage_names()) {
    app.add_subcommand(name, "Run the " + name + " stage");
  }
  app.add_subcommand("run-all", "Run every stage in order");
  for (CLI::App* sub : app.get_subcommands({})) {
    sub->add_option("--config", config_path, "Pipeline config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "Global seed override");
    sub->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
    sub->add_flag("--force", force, "Ignore upstream manifest mismatches");
    sub->add_flag("--quiet", quiet, "No progress output");
  }
  CLI11_PARSE(app, argc, argv);

  try {
    descnet::pipeline::RunOptions options;
    options.force = force;
    if (app.get_subcommands().front()->count("--seed") > 0) options.seed = seed;
    if (workers > 0) options.workers = workers;
    if (!quiet) options.log = &std::cerr;
    descnet::pipeline::Pipeline pipeline(descnet::pipeline::load_config(config_path),
                                         options);
    const std::string command = app.get_subcommands().front()->get_name();
    if (command == "run-all") {
      pipeline.run_all();
    } else {
      pipeline.run(command);
    }
  } catch (const std::exception& e) {
    std::cerr << "descnet: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
