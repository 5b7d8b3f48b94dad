// Copyright 2026 The AFed Authors
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

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "afed/config.hpp"
#include "afed/experiment.hpp"
#include "afed/tensor.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitNumericError = 3;

bool log_enabled() {
  const char* level = std::getenv("AFED_LOG");
  if (level == nullptr) return true;
  const std::string l = level;
  return !(l == "off" || l == "error" || l == "warn");
}

int cmd_run(const std::string& config_path, const std::string& out_dir,
            long long seed_override, bool has_seed, int threads) {
  std::ifstream in(config_path);
  if (!in) {
    std::cerr << "cannot open config: " << config_path << "\n";
    return kExitConfigError;
  }
  std::stringstream buf;
  buf << in.rdbuf();
  afed::cli::Validation v = afed::cli::validate(buf.str());
  if (!v.ok()) {
    std::cerr << "invalid config " << config_path << ":\n";
    for (const std::string& e : v.errors) std::cerr << "  " << e << "\n";
    return kExitConfigError;
  }
  afed::cli::ExperimentConfig cfg = *v.config;
  if (has_seed) {
    cfg.seeds = {static_cast<std::uint64_t>(seed_override)};
  }
  try {
    const afed::cli::RunPaths paths = afed::cli::run(cfg, out_dir, threads);
    if (log_enabled()) {
      std::cerr << "trace:   " << paths.trace << "\n"
                << "summary: " << paths.summary << "\n";
    }
  } catch (const afed::NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumericError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_compare(const std::vector<std::string>& traces,
                const std::string& out_path) {
  try {
    const std::string table = afed::cli::compare_traces(traces);
    if (out_path.empty()) {
      std::cout << table;
    } else {
      std::ofstream out(out_path, std::ios::binary);
      if (!out) {
        std::cerr << "cannot write " << out_path << "\n";
        return 1;
      }
      out << table;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"AFed experiment harness: fair federated learning with "
               "generator-augmented local debiasing"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  long long seed_override = 0;
  int threads = 1;
  CLI::App* run_cmd = app.add_subcommand("run", "run a config (lambda x seed sweep)");
  run_cmd->add_option("config", config_path, "TOML experiment config")
      ->required();
  CLI::Option* seed_opt =
      run_cmd->add_option("--seed", seed_override,
                          "run only this seed (overrides the seeds list)");
  run_cmd->add_option("--out-dir", out_dir, "prefix for output paths");
  run_cmd->add_option("--threads", threads, "parallel sweep cells")
      ->check(CLI::PositiveNumber);

  std::vector<std::string> trace_paths;
  std::string compare_out;
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "merge traces into a trade-off table");
  compare_cmd->add_option("traces", trace_paths, "trace CSV files");
  compare_cmd->add_option("--out", compare_out, "write table here instead of stdout");

  CLI11_PARSE(app, argc, argv);

  if (run_cmd->parsed()) {
    return cmd_run(config_path, out_dir, seed_override, seed_opt->count() > 0,
                   threads);
  }
  return cmd_compare(trace_paths, compare_out);
}
