// Copyright 2026 The hitlbm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <chrono>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "hitlbm/error.hpp"
#include "hitlbm/pipeline/config.hpp"
#include "hitlbm/pipeline/stages.hpp"

namespace {

using hitlbm::pipeline::Stage;

struct Args {
  std::string config;
  std::size_t workers = 0;
  bool force = false;
};

void add_common(CLI::App& cmd, Args& args, bool stage) {
  cmd.add_option("--config", args.config, "Pipeline config file")->required();
  if (!stage) return;
  cmd.add_option("--workers", args.workers, "Per-user worker threads (default: general.workers)")
      ->check(CLI::PositiveNumber);
  cmd.add_flag("--force", args.force, "Re-run even if the stage outputs exist");
}

int run_stages(const std::vector<Stage>& stages, const Args& args) {
  const auto cfg = hitlbm::pipeline::load_config(args.config);
  hitlbm::pipeline::RunOptions opts;
  opts.workers = args.workers;
  opts.force = args.force;
  opts.log = &std::cerr;
  for (Stage s : stages) {
    const auto start = std::chrono::steady_clock::now();
    const auto result = hitlbm::pipeline::run_stage(s, cfg, opts);
    const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
    if (!result.skipped) std::cerr << to_string(s) << ": done in " << took.count() << " s\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Staged pipeline for hierarchical-tree interest extraction and CTR side information"};
  app.require_subcommand(1);
  Args args;

  std::vector<std::pair<CLI::App*, Stage>> stage_cmds;
  for (Stage s : hitlbm::pipeline::all_stages()) {
    auto* cmd = app.add_subcommand(std::string(to_string(s)), "Run the '" + std::string(to_string(s)) + "' stage");
    add_common(*cmd, args, true);
    stage_cmds.emplace_back(cmd, s);
  }
  auto* all = app.add_subcommand("all", "Run every stage in order (ingest reads data.input when set, else synth output)");
  add_common(*all, args, true);
  auto* validate = app.add_subcommand("validate", "Check the config and print the effective values");
  add_common(*validate, args, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (validate->parsed()) {
      const auto cfg = hitlbm::pipeline::load_config(args.config);
      hitlbm::pipeline::validate_environment(cfg);
      std::cout << hitlbm::pipeline::echo_config(cfg);
      return 0;
    }
    if (all->parsed()) {
      const auto cfg = hitlbm::pipeline::load_config(args.config);
      std::vector<Stage> stages;
      for (Stage s : hitlbm::pipeline::all_stages()) {
        if (s == Stage::synth && !cfg.data.input.empty()) continue;
        stages.push_back(s);
      }
      return run_stages(stages, args);
    }
    for (const auto& [cmd, stage] : stage_cmds) {
      if (cmd->parsed()) return run_stages({stage}, args);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hitlbm::pipeline::exit_code_for(e);
  }
  return 1;
}
