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
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace afed::data {

// One record: features, binary label, binary sensitive attribute.
struct Sample {
  std::vector<double> x;
  int y = 0;
  int a = 0;
};

struct ClientDataset {
  int client_id = 0;
  std::vector<Sample> samples;
  std::size_t n() const { return samples.size(); }
};

struct Gaussian2 {
  std::array<double, 2> mean{};
  std::array<double, 4> cov{};  // row-major 2x2, must be SPD
};

// Four-component Gaussian mixture in the plane; each component carries a
// distinct (y, a) cell.
struct MixtureSpec {
  std::array<Gaussian2, 4> comps{};
  std::array<std::pair<int, int>, 4> cells{};  // (y, a) per component
  double dominant_fraction = 0.85;
};

// Means at (+-2, +-2), covariance 0.5*I. y follows the sign of the first
// coordinate, a the sign of the second.
MixtureSpec default_toy_mixture();

// Non-i.i.d. toy data: client k draws dominant_fraction of its samples from
// component k mod 4 and splits the rest evenly over the other three
// components. Counts are exact; only the draws within a component are
// random.
std::vector<ClientDataset> gen_toy_mixture(const MixtureSpec& spec,
                                           std::size_t per_client,
                                           int n_clients, std::uint64_t seed);

// Exact disjoint partition of the pool; Dirichlet(concentration) weights
// choose client sizes only. Weights are redrawn while any client would be
// empty.
std::vector<ClientDataset> dirichlet_partition(const std::vector<Sample>& pool,
                                               int n_clients,
                                               double concentration,
                                               std::uint64_t seed);

struct CsvSchema {
  std::string label_col;
  std::string attr_col;
  std::vector<std::string> numeric_cols;
  std::vector<std::string> categorical_cols;
  std::string label_positive;  // cell value encoded as y=1
  std::string attr_positive;   // cell value encoded as a=1
};

struct CsvError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// RFC-4180 style reader (quotes, embedded commas/newlines, header required).
// Feature layout: numeric columns in schema order, then one-hot blocks for
// each categorical column with categories sorted lexicographically. Values
// are raw; normalization is a separate step. Order-preserving.
std::vector<Sample> ingest_csv(const std::string& path,
                               const CsvSchema& schema);

// Cell counts indexed by 2*y + a.
std::array<std::size_t, 4> group_stats(const std::vector<Sample>& samples);

struct Split {
  std::vector<Sample> train;
  std::vector<Sample> test;
};

// Stratified by (y, a); within each cell round(test_fraction * n) samples go
// to the test side. Relative order is preserved.
Split split_stratified(const std::vector<Sample>& samples,
                       double test_fraction, std::uint64_t seed);

struct ZScore {
  std::vector<double> mean;
  std::vector<double> std_dev;  // clamped below at 1e-8
};

ZScore zscore_fit(const std::vector<Sample>& train);
void zscore_apply(std::vector<Sample>& samples, const ZScore& stats);

}  // namespace afed::data
