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

#include <chrono>
#include <filesystem>
#include <fstream>

#include "afed/config.hpp"
#include "afed/experiment.hpp"
#include "doctest.h"

using namespace afed;
using namespace afed::cli;

namespace fs = std::filesystem;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

// Small toy config that runs in seconds.
std::string smoke_config() {
  return R"(method = "afed_g"
lambdas = [0.0, 0.5]
seeds = [1, 2]

[dataset]
kind = "toy"
per_client = 40
clients = 4

[model]
latent_dim = 4
noise_dim = 4
head_hidden = 8
gan_hidden = 8
extractor_hidden = [8]

[round]
rounds = 2
t1 = 1
t2 = 1
server_g_steps = 2
penalty_mode = "abs"
)";
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::path("afed_cli_test_dir_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("validate: missing method is a named error") {
  const Validation v = validate("lambdas = [0.1]\n");
  CHECK_FALSE(v.ok());
  bool found = false;
  for (const std::string& e : v.errors) {
    if (e.find("method") != std::string::npos) found = true;
  }
  CHECK(found);
}

TEST_CASE("validate: unknown keys and bad values are all reported by name") {
  const Validation v = validate(
      "method = \"fedavg\"\n"
      "typo_key = 3\n"
      "[round]\n"
      "t1 = 0\n"
      "participant_ratio = 1.5\n");
  CHECK_FALSE(v.ok());
  std::size_t named = 0;
  for (const std::string& e : v.errors) {
    if (e.find("typo_key") != std::string::npos) ++named;
    if (e.find("round.t1") != std::string::npos) ++named;
    if (e.find("round.participant_ratio") != std::string::npos) ++named;
  }
  CHECK(named == 3);
}

TEST_CASE("validate: defaults follow the reference configuration") {
  const Validation v = validate("method = \"afed_gan\"\n");
  REQUIRE(v.ok());
  const ExperimentConfig& cfg = *v.config;
  CHECK(cfg.round.rounds == 150);
  CHECK(cfg.round.t1 == 5);
  CHECK(cfg.round.t2 == 5);
  CHECK(cfg.round.participant_ratio == 1.0);
  CHECK(cfg.round.lr_eta == 0.005);
  CHECK(cfg.round.lr_beta == 0.005);
  CHECK(cfg.round.lr_g == 1e-4);
  CHECK(cfg.round.lr_d == 3e-4);
  CHECK(cfg.model.latent_dim == 64);
  CHECK(cfg.model.noise_dim == 32);
  CHECK(cfg.model.head_hidden == 32);
  CHECK(cfg.round.classifier_opt == nn::OptKind::adam);
  CHECK(cfg.dataset.toy.dominant_fraction == 0.85);
}

TEST_CASE("validate: csv config requires an existing file") {
  const Validation v = validate(
      "method = \"fedavg\"\n"
      "[dataset]\n"
      "kind = \"csv\"\n"
      "path = \"does_not_exist.csv\"\n"
      "label_col = \"income\"\n"
      "attr_col = \"sex\"\n"
      "numeric_cols = [\"age\"]\n");
  CHECK_FALSE(v.ok());
  bool found = false;
  for (const std::string& e : v.errors) {
    if (e.find("dataset.path") != std::string::npos) found = true;
  }
  CHECK(found);
}

TEST_CASE("canonical form round-trips to itself") {
  const Validation v = validate(smoke_config());
  REQUIRE(v.ok());
  const std::string canon = canonical_toml(*v.config);
  const Validation v2 = validate(canon);
  REQUIRE(v2.ok());
  CHECK(canonical_toml(*v2.config) == canon);
}

TEST_CASE("run: smoke config produces the expected trace shape quickly") {
  const auto started = std::chrono::steady_clock::now();
  const Validation v = validate(smoke_config());
  REQUIRE(v.ok());
  TempDir dir;
  const RunPaths paths = run(*v.config, dir.path.string(), 1);
  const std::string trace = read_file(paths.trace);
  // Header + 2 lambdas x 2 seeds x 2 rounds.
  std::size_t lines = 0;
  for (char c : trace) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 1 + 2 * 2 * 2);
  const std::string summary = read_file(paths.summary);
  CHECK(summary.find("per_lambda") != std::string::npos);
  const auto elapsed = std::chrono::duration_cast<std::chrono::seconds>(
      std::chrono::steady_clock::now() - started);
  CHECK(elapsed.count() < 60);
}

TEST_CASE("run: same config and seed produce byte-identical outputs") {
  const Validation v = validate(smoke_config());
  REQUIRE(v.ok());
  TempDir d1, d2;
  const RunPaths p1 = run(*v.config, d1.path.string(), 1);
  const RunPaths p2 = run(*v.config, d2.path.string(), 2);  // threads differ
  CHECK(read_file(p1.trace) == read_file(p2.trace));
  CHECK(read_file(p1.summary) == read_file(p2.summary));
}

TEST_CASE("run: sweep of 2 lambdas x 2 seeds yields 4 summary cells") {
  const Validation v = validate(smoke_config());
  REQUIRE(v.ok());
  TempDir dir;
  const std::vector<CellResult> cells = run_sweep(*v.config, 1);
  CHECK(cells.size() == 4);
  const std::string summary = summary_json(*v.config, cells);
  std::size_t count = 0;
  for (std::size_t pos = summary.find("final_acc"); pos != std::string::npos;
       pos = summary.find("final_acc", pos + 1)) {
    ++count;
  }
  CHECK(count == 4);
}

TEST_CASE("compare: single trace passes through; merge keys are correct") {
  const Validation v = validate(smoke_config());
  REQUIRE(v.ok());
  TempDir dir;
  const RunPaths paths = run(*v.config, dir.path.string(), 1);
  const std::string table = compare_traces({paths.trace});
  // Two lambda rows for the method.
  std::size_t lines = 0;
  for (char c : table) lines += c == '\n' ? 1 : 0;
  CHECK(lines == 1 + 2);
  CHECK(table.find("afed_g,") != std::string::npos);

  // Merging a second method keeps rows keyed by (method, lambda).
  ExperimentConfig other = *v.config;
  other.round.method = fed::Method::fedavg;
  other.output.trace = "trace_fedavg.csv";
  other.output.summary = "summary_fedavg.json";
  const RunPaths paths2 = run(other, dir.path.string(), 1);
  const std::string merged = compare_traces({paths.trace, paths2.trace});
  CHECK(merged.find("fedavg,") != std::string::npos);
  CHECK(merged.find("afed_g,") != std::string::npos);
  std::size_t merged_lines = 0;
  for (char c : merged) merged_lines += c == '\n' ? 1 : 0;
  CHECK(merged_lines == 1 + 4);
}

TEST_CASE("compare: empty input is an error") {
  CHECK_THROWS_AS(compare_traces({}), std::invalid_argument);
}

TEST_CASE("lambda 0 sweep point equals a fedavg run") {
  Validation v = validate(smoke_config());
  REQUIRE(v.ok());
  ExperimentConfig afed_cfg = *v.config;
  afed_cfg.lambdas = {0.0};
  afed_cfg.seeds = {5};
  ExperimentConfig avg_cfg = afed_cfg;
  avg_cfg.round.method = fed::Method::fedavg;
  const std::vector<CellResult> a = run_sweep(afed_cfg, 1);
  const std::vector<CellResult> b = run_sweep(avg_cfg, 1);
  REQUIRE(a.size() == 1);
  REQUIRE(b.size() == 1);
  REQUIRE(a[0].trace.size() == b[0].trace.size());
  for (std::size_t i = 0; i < a[0].trace.size(); ++i) {
    CHECK(a[0].trace[i].acc == b[0].trace[i].acc);
    CHECK(a[0].trace[i].dp_gap == b[0].trace[i].dp_gap);
    CHECK(a[0].trace[i].loss_y == b[0].trace[i].loss_y);
  }
}

TEST_CASE("checkpoints are written when configured") {
  Validation v = validate(smoke_config());
  REQUIRE(v.ok());
  ExperimentConfig cfg = *v.config;
  cfg.lambdas = {0.0};
  cfg.seeds = {1};
  cfg.output.checkpoint_dir = "ckpts";
  cfg.output.checkpoint_every = 1;
  TempDir dir;
  run(cfg, dir.path.string(), 1);
  std::size_t n_files = 0;
  for (const auto& entry : fs::directory_iterator(dir.path / "ckpts")) {
    (void)entry;
    ++n_files;
  }
  CHECK(n_files == 2);  // one per round
}
