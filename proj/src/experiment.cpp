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

#include "afed/experiment.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

namespace afed::cli {

namespace fs = std::filesystem;

namespace {
std::vector<CellResult> run_sweep_impl(const ExperimentConfig& cfg,
                                       int threads,
                                       const std::string& out_dir);
}  // namespace

fed::FedDataset build_dataset(const DatasetCfg& cfg, std::uint64_t seed) {
  const std::uint64_t data_seed = substream(seed, 0xDA7A);
  fed::FedDataset out;
  if (cfg.kind == DatasetKind::toy) {
    const ToyDataCfg& toy = cfg.toy;
    data::MixtureSpec spec;
    for (std::size_t c = 0; c < 4; ++c) {
      spec.comps[c].mean = {toy.means[2 * c], toy.means[2 * c + 1]};
      spec.comps[c].cov = {toy.cov_scale, 0.0, 0.0, toy.cov_scale};
      spec.cells[c] = {toy.cells[c] / 2, toy.cells[c] % 2};
    }
    spec.dominant_fraction = toy.dominant_fraction;
    std::vector<data::ClientDataset> clients =
        data::gen_toy_mixture(spec, toy.per_client, toy.clients, data_seed);
    // Per-client stratified split; the union of test shards is the global
    // test set.
    for (data::ClientDataset& c : clients) {
      data::Split split = data::split_stratified(
          c.samples, cfg.test_fraction,
          substream(data_seed, 0x517Cu, static_cast<std::uint64_t>(c.client_id)));
      out.global_test.insert(out.global_test.end(), split.test.begin(),
                             split.test.end());
      c.samples = std::move(split.train);
      out.clients.push_back(std::move(c));
    }
  } else {
    const CsvDataCfg& csv = cfg.csv;
    std::vector<data::Sample> pool = data::ingest_csv(csv.path, csv.schema);
    data::Split split =
        data::split_stratified(pool, cfg.test_fraction, data_seed);
    const data::ZScore stats = data::zscore_fit(split.train);
    data::zscore_apply(split.train, stats);
    data::zscore_apply(split.test, stats);
    out.clients = data::dirichlet_partition(split.train, csv.clients,
                                            csv.concentration, data_seed);
    out.global_test = std::move(split.test);
  }
  return out;
}

namespace {

models::ModelSpec resolve_model_spec(const ExperimentConfig& cfg,
                                     const fed::FedDataset& data) {
  models::ModelSpec spec = cfg.model;
  if (data.clients.empty() || data.clients[0].samples.empty()) {
    throw std::runtime_error("dataset produced no training samples");
  }
  spec.input_dim = data.clients[0].samples[0].x.size();
  return spec;
}

void maybe_checkpoint(const ExperimentConfig& cfg, const std::string& out_dir,
                      std::size_t lambda_idx, std::uint64_t seed,
                      const fed::FederationState& state, int round) {
  if (cfg.output.checkpoint_dir.empty() || cfg.output.checkpoint_every <= 0) {
    return;
  }
  if ((round + 1) % cfg.output.checkpoint_every != 0) return;
  fs::path dir = cfg.output.checkpoint_dir;
  if (!out_dir.empty()) dir = fs::path(out_dir) / dir;
  fs::create_directories(dir);
  std::ostringstream name;
  name << "cell_l" << lambda_idx << "_s" << seed << "_round" << round + 1
       << ".json";
  models::save_checkpoint((dir / name.str()).string(), state.clf, state.gen,
                          state.disc);
}

std::vector<CellResult> run_sweep_impl(const ExperimentConfig& cfg,
                                       int threads,
                                       const std::string& out_dir) {
  // Datasets depend on the seed only, so all lambda cells of a seed share
  // one build.
  std::vector<fed::FedDataset> datasets;
  datasets.reserve(cfg.seeds.size());
  for (std::uint64_t seed : cfg.seeds) {
    datasets.push_back(build_dataset(cfg.dataset, seed));
  }

  struct Cell {
    std::size_t lambda_idx;
    std::size_t seed_idx;
  };
  std::vector<Cell> cells;
  for (std::size_t li = 0; li < cfg.lambdas.size(); ++li) {
    for (std::size_t si = 0; si < cfg.seeds.size(); ++si) {
      cells.push_back({li, si});
    }
  }
  std::vector<CellResult> results(cells.size());

  auto run_cell = [&](std::size_t idx) {
    const Cell& cell = cells[idx];
    const fed::FedDataset& data = datasets[cell.seed_idx];
    const models::ModelSpec spec = resolve_model_spec(cfg, data);
    fed::RoundConfig rc = cfg.round;
    rc.lambda = cfg.lambdas[cell.lambda_idx];
    const std::uint64_t seed = cfg.seeds[cell.seed_idx];
    CellResult& res = results[idx];
    res.lambda = rc.lambda;
    res.seed = seed;
    res.trace = fed::run_experiment(
        data, spec, rc, seed,
        [&](const fed::FederationState& state, int round) {
          maybe_checkpoint(cfg, out_dir, cell.lambda_idx, seed, state, round);
        });
  };

  if (threads <= 1 || cells.size() <= 1) {
    for (std::size_t i = 0; i < cells.size(); ++i) run_cell(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= cells.size()) return;
        try {
          run_cell(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    const int n_threads =
        std::min<int>(threads, static_cast<int>(cells.size()));
    pool.reserve(static_cast<std::size_t>(n_threads));
    for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
  }
  return results;
}

}  // namespace

std::vector<CellResult> run_sweep(const ExperimentConfig& cfg, int threads) {
  return run_sweep_impl(cfg, threads, "");
}

std::string trace_csv(const std::vector<CellResult>& cells) {
  std::ostringstream out;
  out << "round,method,seed,lambda,acc,dp_gap,loss_y,loss_fair,loss_g,loss_d\n";
  for (const CellResult& cell : cells) {
    for (const fed::RoundRow& row : cell.trace) {
      out << row.round << ',' << fed::method_name(row.method) << ','
          << row.seed << ',' << format_double(row.lambda) << ','
          << format_double(row.acc) << ',' << format_double(row.dp_gap) << ','
          << format_double(row.loss_y) << ',' << format_double(row.loss_fair)
          << ',' << format_double(row.loss_g) << ','
          << format_double(row.loss_d) << '\n';
    }
  }
  return out.str();
}

namespace {

struct MeanStd {
  double mean = 0.0;
  double std_dev = 0.0;
};

MeanStd mean_std(const std::vector<double>& v) {
  MeanStd ms;
  if (v.empty()) return ms;
  for (double x : v) ms.mean += x;
  ms.mean /= static_cast<double>(v.size());
  for (double x : v) ms.std_dev += (x - ms.mean) * (x - ms.mean);
  ms.std_dev = std::sqrt(ms.std_dev / static_cast<double>(v.size()));
  return ms;
}

}  // namespace

std::string summary_json(const ExperimentConfig& cfg,
                         const std::vector<CellResult>& cells) {
  using json = nlohmann::ordered_json;
  json j;
  j["method"] = fed::method_name(cfg.round.method);
  j["cells"] = json::array();
  for (const CellResult& cell : cells) {
    if (cell.trace.empty()) continue;
    const fed::RoundRow& last = cell.trace.back();
    j["cells"].push_back({{"lambda", cell.lambda},
                          {"seed", cell.seed},
                          {"final_acc", last.acc},
                          {"final_dp_gap", last.dp_gap}});
  }
  // Across-seed mean and standard deviation per lambda.
  j["per_lambda"] = json::array();
  for (double lambda : cfg.lambdas) {
    std::vector<double> accs, gaps;
    for (const CellResult& cell : cells) {
      if (cell.lambda == lambda && !cell.trace.empty()) {
        accs.push_back(cell.trace.back().acc);
        gaps.push_back(cell.trace.back().dp_gap);
      }
    }
    const MeanStd acc = mean_std(accs);
    const MeanStd gap = mean_std(gaps);
    j["per_lambda"].push_back({{"lambda", lambda},
                               {"acc_mean", acc.mean},
                               {"acc_std", acc.std_dev},
                               {"dp_gap_mean", gap.mean},
                               {"dp_gap_std", gap.std_dev},
                               {"seeds", accs.size()}});
  }
  return j.dump(1) + "\n";
}

RunPaths run(const ExperimentConfig& cfg, const std::string& out_dir,
             int threads) {
  const std::vector<CellResult> cells = run_sweep_impl(cfg, threads, out_dir);
  RunPaths paths;
  auto resolve = [&](const std::string& rel) {
    fs::path p = rel;
    if (!out_dir.empty()) p = fs::path(out_dir) / p;
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    return p.string();
  };
  paths.trace = resolve(cfg.output.trace);
  paths.summary = resolve(cfg.output.summary);
  {
    std::ofstream out(paths.trace, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write trace: " + paths.trace);
    out << trace_csv(cells);
  }
  {
    std::ofstream out(paths.summary, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write summary: " + paths.summary);
    out << summary_json(cfg, cells);
  }
  return paths;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_double_field(const std::string& s) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw std::runtime_error("malformed numeric field in trace: '" + s + "'");
  }
  return v;
}

}  // namespace

std::string compare_traces(const std::vector<std::string>& trace_paths) {
  if (trace_paths.empty()) {
    throw std::invalid_argument("compare: no trace files given");
  }
  struct Key {
    std::string method;
    double lambda;
    bool operator<(const Key& o) const {
      if (method != o.method) return method < o.method;
      return lambda < o.lambda;
    }
  };
  // Final-round row per (method, lambda, seed); later rounds overwrite.
  std::map<Key, std::map<std::uint64_t, std::pair<double, double>>> final_rows;
  for (const std::string& path : trace_paths) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read trace: " + path);
    std::string line;
    if (!std::getline(in, line)) {
      throw std::runtime_error("empty trace file: " + path);
    }
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const std::vector<std::string> f = split_csv_line(line);
      if (f.size() != 10) {
        throw std::runtime_error("malformed trace row in " + path);
      }
      const Key key{f[1], parse_double_field(f[3])};
      const std::uint64_t seed = std::stoull(f[2]);
      final_rows[key][seed] = {parse_double_field(f[4]),
                               parse_double_field(f[5])};
    }
  }
  std::ostringstream out;
  out << "method,lambda,seeds,acc_mean,acc_std,dp_gap_mean,dp_gap_std\n";
  for (const auto& [key, by_seed] : final_rows) {
    std::vector<double> accs, gaps;
    for (const auto& [seed, vals] : by_seed) {
      accs.push_back(vals.first);
      gaps.push_back(vals.second);
    }
    const MeanStd acc = mean_std(accs);
    const MeanStd gap = mean_std(gaps);
    out << key.method << ',' << format_double(key.lambda) << ','
        << by_seed.size() << ',' << format_double(acc.mean) << ','
        << format_double(acc.std_dev) << ',' << format_double(gap.mean) << ','
        << format_double(gap.std_dev) << '\n';
  }
  return out.str();
}

}  // namespace afed::cli
