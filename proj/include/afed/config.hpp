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

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "afed/data.hpp"
#include "afed/federation.hpp"
#include "afed/models.hpp"

namespace afed::cli {

struct ToyDataCfg {
  std::size_t per_client = 100;
  int clients = 4;
  double dominant_fraction = 0.85;
  // Flat component means (x0,y0, x1,y1, ...) and the (y,a) cell index
  // (2*y + a) each component carries.
  std::array<double, 8> means = {-2.0, -2.0, -2.0, 2.0, 2.0, -2.0, 2.0, 2.0};
  double cov_scale = 0.5;
  std::array<int, 4> cells = {0, 1, 2, 3};
};

struct CsvDataCfg {
  std::string path;
  data::CsvSchema schema;
  int clients = 5;
  double concentration = 0.5;
};

enum class DatasetKind { toy, csv };

struct DatasetCfg {
  DatasetKind kind = DatasetKind::toy;
  double test_fraction = 0.2;
  ToyDataCfg toy;
  CsvDataCfg csv;
};

struct OutputCfg {
  std::string trace = "trace.csv";
  std::string summary = "summary.json";
  std::string checkpoint_dir;
  int checkpoint_every = 0;  // rounds; 0 disables checkpoints
};

struct ExperimentConfig {
  DatasetCfg dataset;
  models::ModelSpec model;
  fed::RoundConfig round;  // round.lambda is taken from the sweep list
  std::vector<double> lambdas = {0.0};
  std::vector<std::uint64_t> seeds = {1};
  OutputCfg output;
};

struct Validation {
  std::optional<ExperimentConfig> config;
  std::vector<std::string> errors;  // each names the offending key
  bool ok() const { return errors.empty(); }
};

// Parses and validates TOML text (flat key = value pairs under [section]
// headers; strings, numbers, booleans and scalar arrays).
Validation validate(const std::string& toml_text);

// Fully-defaulted canonical form; validate(canonical_toml(c)) reproduces it
// byte for byte.
std::string canonical_toml(const ExperimentConfig& cfg);

// Shortest round-trip decimal representation (used for canonical TOML, CSV
// traces and the summary).
std::string format_double(double v);

}  // namespace afed::cli
