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

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "afed/config.hpp"
#include "afed/federation.hpp"

namespace afed::cli {

// Client shards plus the global test split for one seed.
fed::FedDataset build_dataset(const DatasetCfg& cfg, std::uint64_t seed);

struct CellResult {
  double lambda = 0.0;
  std::uint64_t seed = 0;
  fed::MetricTrace trace;
};

// Runs the full lambda x seed sweep; cells are independent and may run on
// several threads. Results come back in (lambda, seed) order regardless of
// the thread count.
std::vector<CellResult> run_sweep(const ExperimentConfig& cfg, int threads);

std::string trace_csv(const std::vector<CellResult>& cells);
std::string summary_json(const ExperimentConfig& cfg,
                         const std::vector<CellResult>& cells);

struct RunPaths {
  std::string trace;
  std::string summary;
};

// Sweep + write trace CSV and summary JSON (paths from the config, joined
// under out_dir when given).
RunPaths run(const ExperimentConfig& cfg, const std::string& out_dir,
             int threads);

// Merges final-round rows of the given trace CSVs into a per-(method,
// lambda) table with across-seed means, CSV-formatted and sorted by method
// then lambda.
std::string compare_traces(const std::vector<std::string>& trace_paths);

}  // namespace afed::cli
