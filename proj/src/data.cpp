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

#include "afed/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "afed/rng.hpp"

namespace afed::data {

namespace {

// Lower-triangular Cholesky factor of a 2x2 SPD matrix.
struct Chol2 {
  double l00, l10, l11;
};

Chol2 cholesky2(const std::array<double, 4>& cov) {
  const double a = cov[0], b = cov[1], c = cov[3];
  if (!(a > 0.0)) throw std::invalid_argument("covariance not SPD");
  const double l00 = std::sqrt(a);
  const double l10 = b / l00;
  const double rest = c - l10 * l10;
  if (!(rest > 0.0)) throw std::invalid_argument("covariance not SPD");
  return {l00, l10, std::sqrt(rest)};
}

Sample draw_from(const Gaussian2& g, const Chol2& ch, int y, int a, Rng& rng) {
  const double n0 = rng.normal();
  const double n1 = rng.normal();
  Sample s;
  s.x = {g.mean[0] + ch.l00 * n0, g.mean[1] + ch.l10 * n0 + ch.l11 * n1};
  s.y = y;
  s.a = a;
  return s;
}

}  // namespace

MixtureSpec default_toy_mixture() {
  MixtureSpec spec;
  const std::array<double, 4> cov = {0.5, 0.0, 0.0, 0.5};
  // Component order: (y,a) = (0,0), (0,1), (1,0), (1,1).
  spec.comps[0] = {{-2.0, -2.0}, cov};
  spec.comps[1] = {{-2.0, 2.0}, cov};
  spec.comps[2] = {{2.0, -2.0}, cov};
  spec.comps[3] = {{2.0, 2.0}, cov};
  spec.cells = {{{0, 0}, {0, 1}, {1, 0}, {1, 1}}};
  spec.dominant_fraction = 0.85;
  return spec;
}

std::vector<ClientDataset> gen_toy_mixture(const MixtureSpec& spec,
                                           std::size_t per_client,
                                           int n_clients, std::uint64_t seed) {
  if (per_client < 20) {
    throw std::invalid_argument("gen_toy_mixture: per_client must be >= 20");
  }
  if (!(spec.dominant_fraction > 0.0 && spec.dominant_fraction <= 1.0)) {
    throw std::invalid_argument("gen_toy_mixture: dominant fraction not in (0,1]");
  }
  {
    std::set<std::pair<int, int>> distinct(spec.cells.begin(), spec.cells.end());
    if (distinct.size() != 4) {
      throw std::invalid_argument("gen_toy_mixture: (y,a) cells must be distinct");
    }
  }
  std::array<Chol2, 4> chol{};
  for (int c = 0; c < 4; ++c) chol[static_cast<std::size_t>(c)] = cholesky2(spec.comps[static_cast<std::size_t>(c)].cov);

  const auto dominant =
      static_cast<std::size_t>(std::llround(spec.dominant_fraction *
                                            static_cast<double>(per_client)));
  const std::size_t rest = per_client - dominant;

  std::vector<ClientDataset> out;
  out.reserve(static_cast<std::size_t>(n_clients));
  for (int k = 0; k < n_clients; ++k) {
    Rng rng(substream(seed, 0xD07Au, static_cast<std::uint64_t>(k)));
    ClientDataset ds;
    ds.client_id = k;
    ds.samples.reserve(per_client);
    const std::size_t dom_comp = static_cast<std::size_t>(k % 4);
    // Exact per-component counts: dominant first, remainder split evenly over
    // the other three (earlier components absorb any leftover).
    std::array<std::size_t, 4> counts{};
    counts[dom_comp] = dominant;
    std::size_t base = rest / 3, extra = rest % 3;
    for (std::size_t c = 0; c < 4; ++c) {
      if (c == dom_comp) continue;
      counts[c] = base + (extra > 0 ? 1 : 0);
      if (extra > 0) --extra;
    }
    for (std::size_t c = 0; c < 4; ++c) {
      for (std::size_t i = 0; i < counts[c]; ++i) {
        ds.samples.push_back(draw_from(spec.comps[c], chol[c],
                                       spec.cells[c].first,
                                       spec.cells[c].second, rng));
      }
    }
    out.push_back(std::move(ds));
  }
  return out;
}

std::vector<ClientDataset> dirichlet_partition(const std::vector<Sample>& pool,
                                               int n_clients,
                                               double concentration,
                                               std::uint64_t seed) {
  if (pool.empty()) throw std::invalid_argument("dirichlet_partition: empty pool");
  if (n_clients < 1) throw std::invalid_argument("dirichlet_partition: n_clients < 1");
  if (static_cast<std::size_t>(n_clients) > pool.size()) {
    throw std::invalid_argument("dirichlet_partition: more clients than samples");
  }
  if (!(concentration > 0.0)) {
    throw std::invalid_argument("dirichlet_partition: concentration must be > 0");
  }
  const std::size_t n = pool.size();
  const auto nc = static_cast<std::size_t>(n_clients);
  Rng rng(substream(seed, 0xD112u));

  std::vector<std::size_t> sizes(nc, 0);
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<double> w(nc);
    double total = 0.0;
    for (double& v : w) {
      v = rng.gamma(concentration);
      total += v;
    }
    // Largest-remainder rounding keeps the partition exact.
    std::vector<double> exact(nc);
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < nc; ++k) {
      exact[k] = w[k] / total * static_cast<double>(n);
      sizes[k] = static_cast<std::size_t>(std::floor(exact[k]));
      assigned += sizes[k];
    }
    std::vector<std::size_t> order(nc);
    for (std::size_t k = 0; k < nc; ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) {
                       const double fi = exact[i] - std::floor(exact[i]);
                       const double fj = exact[j] - std::floor(exact[j]);
                       return fi > fj;
                     });
    for (std::size_t i = 0; assigned < n; ++i, ++assigned) {
      sizes[order[i % nc]] += 1;
    }
    if (std::all_of(sizes.begin(), sizes.end(),
                    [](std::size_t s) { return s > 0; })) {
      break;
    }
    if (attempt == 999) {
      throw std::runtime_error("dirichlet_partition: could not draw nonempty sizes");
    }
  }

  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);

  std::vector<ClientDataset> out(nc);
  std::size_t off = 0;
  for (std::size_t k = 0; k < nc; ++k) {
    out[k].client_id = static_cast<int>(k);
    out[k].samples.reserve(sizes[k]);
    for (std::size_t i = 0; i < sizes[k]; ++i) {
      out[k].samples.push_back(pool[idx[off++]]);
    }
  }
  return out;
}

namespace {

// Minimal RFC-4180 reader: returns rows of fields, handling quoted fields
// with embedded commas, quotes, and newlines.
std::vector<std::vector<std::string>> read_csv_rows(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open CSV file: " + path);
  std::string content((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  std::size_t i = 0;
  const std::size_t n = content.size();
  auto end_field = [&] { row.push_back(std::move(field)); field.clear(); };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  while (i < n) {
    const char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < n && content[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r') {
      // swallow; row ends at following \n
    } else if (c == '\n') {
      end_row();
    } else {
      field.push_back(c);
    }
    ++i;
  }
  if (!field.empty() || !row.empty()) end_row();
  return rows;
}

}  // namespace

std::vector<Sample> ingest_csv(const std::string& path,
                               const CsvSchema& schema) {
  const auto rows = read_csv_rows(path);
  if (rows.empty()) throw CsvError("CSV has no header row: " + path);
  const std::vector<std::string>& header = rows.front();
  std::map<std::string, std::size_t> col_of;
  for (std::size_t j = 0; j < header.size(); ++j) col_of[header[j]] = j;

  auto require_col = [&](const std::string& name) {
    auto it = col_of.find(name);
    if (it == col_of.end()) throw CsvError("missing column: " + name);
    return it->second;
  };
  const std::size_t label_idx = require_col(schema.label_col);
  const std::size_t attr_idx = require_col(schema.attr_col);
  std::vector<std::size_t> num_idx, cat_idx;
  for (const auto& c : schema.numeric_cols) num_idx.push_back(require_col(c));
  for (const auto& c : schema.categorical_cols) cat_idx.push_back(require_col(c));

  // Categories per categorical column, sorted for a deterministic encoding.
  std::vector<std::vector<std::string>> cats(cat_idx.size());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cat_idx.size(); ++c) {
      if (cat_idx[c] < rows[r].size()) cats[c].push_back(rows[r][cat_idx[c]]);
    }
  }
  for (auto& v : cats) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }

  std::vector<Sample> out;
  out.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() != header.size()) {
      throw CsvError("row " + std::to_string(r + 1) + ": expected " +
                     std::to_string(header.size()) + " fields, got " +
                     std::to_string(row.size()));
    }
    Sample s;
    s.y = row[label_idx] == schema.label_positive ? 1 : 0;
    s.a = row[attr_idx] == schema.attr_positive ? 1 : 0;
    for (std::size_t c = 0; c < num_idx.size(); ++c) {
      const std::string& cell = row[num_idx[c]];
      try {
        std::size_t pos = 0;
        const double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument(cell);
        s.x.push_back(v);
      } catch (const std::exception&) {
        throw CsvError("row " + std::to_string(r + 1) + ", column '" +
                       schema.numeric_cols[c] + "': cannot parse '" + cell +
                       "' as a number");
      }
    }
    for (std::size_t c = 0; c < cat_idx.size(); ++c) {
      const std::string& cell = row[cat_idx[c]];
      for (const std::string& cat : cats[c]) {
        s.x.push_back(cell == cat ? 1.0 : 0.0);
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::array<std::size_t, 4> group_stats(const std::vector<Sample>& samples) {
  if (samples.empty()) throw std::invalid_argument("group_stats: empty dataset");
  std::array<std::size_t, 4> cells{};
  for (const Sample& s : samples) {
    cells[static_cast<std::size_t>(2 * s.y + s.a)] += 1;
  }
  return cells;
}

Split split_stratified(const std::vector<Sample>& samples,
                       double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("split_stratified: fraction must be in [0,1)");
  }
  std::array<std::vector<std::size_t>, 4> cells;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    cells[static_cast<std::size_t>(2 * samples[i].y + samples[i].a)].push_back(i);
  }
  std::vector<bool> is_test(samples.size(), false);
  Rng rng(substream(seed, 0x5714u));
  for (auto& cell : cells) {
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(cell.size())));
    std::vector<std::size_t> shuffled = cell;
    rng.shuffle(shuffled);
    for (std::size_t i = 0; i < n_test; ++i) is_test[shuffled[i]] = true;
  }
  Split split;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (is_test[i] ? split.test : split.train).push_back(samples[i]);
  }
  return split;
}

ZScore zscore_fit(const std::vector<Sample>& train) {
  if (train.empty()) throw std::invalid_argument("zscore_fit: empty dataset");
  const std::size_t d = train[0].x.size();
  ZScore st;
  st.mean.assign(d, 0.0);
  st.std_dev.assign(d, 0.0);
  for (const Sample& s : train) {
    for (std::size_t j = 0; j < d; ++j) st.mean[j] += s.x[j];
  }
  for (double& m : st.mean) m /= static_cast<double>(train.size());
  for (const Sample& s : train) {
    for (std::size_t j = 0; j < d; ++j) {
      const double dv = s.x[j] - st.mean[j];
      st.std_dev[j] += dv * dv;
    }
  }
  for (double& v : st.std_dev) {
    v = std::max(std::sqrt(v / static_cast<double>(train.size())), 1e-8);
  }
  return st;
}

void zscore_apply(std::vector<Sample>& samples, const ZScore& stats) {
  for (Sample& s : samples) {
    if (s.x.size() != stats.mean.size()) {
      throw std::invalid_argument("zscore_apply: dimension mismatch");
    }
    for (std::size_t j = 0; j < s.x.size(); ++j) {
      s.x[j] = (s.x[j] - stats.mean[j]) / stats.std_dev[j];
    }
  }
}

}  // namespace afed::data
