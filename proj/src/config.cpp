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

#include "afed/config.hpp"

#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <variant>

namespace afed::cli {

namespace {

// --- tiny TOML subset ------------------------------------------------------
// Supported: comments, [section] headers, key = value with string, number,
// boolean, or a flat array of those. Enough for experiment configs; no
// nested tables or multi-line values.

struct TomlValue {
  std::variant<std::string, double, bool, std::vector<TomlValue>> v;
  bool is_string() const { return std::holds_alternative<std::string>(v); }
  bool is_number() const { return std::holds_alternative<double>(v); }
  bool is_bool() const { return std::holds_alternative<bool>(v); }
  bool is_array() const {
    return std::holds_alternative<std::vector<TomlValue>>(v);
  }
};

using TomlTable = std::map<std::string, TomlValue>;

struct TomlParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Removes a trailing comment that is not inside a string literal.
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

TomlValue parse_scalar(const std::string& tok, int line_no) {
  if (tok.size() >= 2 && tok.front() == '"' && tok.back() == '"') {
    std::string out;
    for (std::size_t i = 1; i + 1 < tok.size(); ++i) {
      if (tok[i] == '\\' && i + 2 < tok.size()) {
        ++i;
        switch (tok[i]) {
          case 'n': out.push_back('\n'); break;
          case 't': out.push_back('\t'); break;
          case '"': out.push_back('"'); break;
          case '\\': out.push_back('\\'); break;
          default: out.push_back(tok[i]);
        }
      } else {
        out.push_back(tok[i]);
      }
    }
    return {out};
  }
  if (tok == "true") return {true};
  if (tok == "false") return {false};
  double num = 0.0;
  const char* first = tok.data();
  const char* last = tok.data() + tok.size();
  auto res = std::from_chars(first, last, num);
  if (res.ec == std::errc() && res.ptr == last) return {num};
  throw TomlParseError("line " + std::to_string(line_no) +
                       ": cannot parse value '" + tok + "'");
}

std::vector<std::string> split_array_items(const std::string& body,
                                           int line_no) {
  std::vector<std::string> items;
  std::string cur;
  bool in_str = false;
  for (char c : body) {
    if (c == '"') in_str = !in_str;
    if (c == ',' && !in_str) {
      items.push_back(strip(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  const std::string tail = strip(cur);
  if (!tail.empty()) items.push_back(tail);
  if (in_str) {
    throw TomlParseError("line " + std::to_string(line_no) +
                         ": unterminated string");
  }
  return items;
}

TomlTable parse_toml(const std::string& text) {
  TomlTable table;
  std::string section;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string line = strip(strip_comment(raw));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') {
        throw TomlParseError("line " + std::to_string(line_no) +
                             ": malformed section header");
      }
      section = strip(line.substr(1, line.size() - 2));
      continue;
    }
    const std::size_t eq = line.find('=');
    if (eq == std::string::npos) {
      throw TomlParseError("line " + std::to_string(line_no) +
                           ": expected key = value");
    }
    const std::string key = strip(line.substr(0, eq));
    const std::string val = strip(line.substr(eq + 1));
    if (key.empty() || val.empty()) {
      throw TomlParseError("line " + std::to_string(line_no) +
                           ": empty key or value");
    }
    const std::string full = section.empty() ? key : section + "." + key;
    if (val.front() == '[') {
      if (val.back() != ']') {
        throw TomlParseError("line " + std::to_string(line_no) +
                             ": arrays must close on the same line");
      }
      std::vector<TomlValue> arr;
      for (const std::string& item :
           split_array_items(val.substr(1, val.size() - 2), line_no)) {
        arr.push_back(parse_scalar(item, line_no));
      }
      table[full] = {arr};
    } else {
      table[full] = parse_scalar(val, line_no);
    }
  }
  return table;
}

// --- typed readers with error accumulation ---------------------------------

struct Reader {
  const TomlTable& table;
  std::vector<std::string>* errors;
  std::vector<std::string> consumed;

  const TomlValue* find(const std::string& key) {
    auto it = table.find(key);
    if (it == table.end()) return nullptr;
    consumed.push_back(key);
    return &it->second;
  }

  void fail(const std::string& key, const std::string& why) {
    errors->push_back(key + ": " + why);
  }

  void read_string(const std::string& key, std::string* out) {
    if (const TomlValue* v = find(key)) {
      if (v->is_string()) {
        *out = std::get<std::string>(v->v);
      } else {
        fail(key, "expected a string");
      }
    }
  }

  void read_double(const std::string& key, double* out) {
    if (const TomlValue* v = find(key)) {
      if (v->is_number()) {
        *out = std::get<double>(v->v);
      } else {
        fail(key, "expected a number");
      }
    }
  }

  void read_int(const std::string& key, int* out) {
    double d = static_cast<double>(*out);
    const std::size_t before = errors->size();
    read_double(key, &d);
    if (errors->size() != before) return;
    if (d != std::floor(d)) {
      fail(key, "expected an integer");
      return;
    }
    *out = static_cast<int>(d);
  }

  void read_size(const std::string& key, std::size_t* out) {
    int v = static_cast<int>(*out);
    const std::size_t before = errors->size();
    read_int(key, &v);
    if (errors->size() != before) return;
    if (v < 0) {
      fail(key, "must be non-negative");
      return;
    }
    *out = static_cast<std::size_t>(v);
  }

  void read_bool(const std::string& key, bool* out) {
    if (const TomlValue* v = find(key)) {
      if (v->is_bool()) {
        *out = std::get<bool>(v->v);
      } else {
        fail(key, "expected true or false");
      }
    }
  }

  bool read_number_array(const std::string& key, std::vector<double>* out) {
    if (const TomlValue* v = find(key)) {
      if (!v->is_array()) {
        fail(key, "expected an array");
        return false;
      }
      std::vector<double> vals;
      for (const TomlValue& item : std::get<std::vector<TomlValue>>(v->v)) {
        if (!item.is_number()) {
          fail(key, "expected numbers only");
          return false;
        }
        vals.push_back(std::get<double>(item.v));
      }
      *out = std::move(vals);
      return true;
    }
    return false;
  }

  bool read_string_array(const std::string& key,
                         std::vector<std::string>* out) {
    if (const TomlValue* v = find(key)) {
      if (!v->is_array()) {
        fail(key, "expected an array");
        return false;
      }
      std::vector<std::string> vals;
      for (const TomlValue& item : std::get<std::vector<TomlValue>>(v->v)) {
        if (!item.is_string()) {
          fail(key, "expected strings only");
          return false;
        }
        vals.push_back(std::get<std::string>(item.v));
      }
      *out = std::move(vals);
      return true;
    }
    return false;
  }
};

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  std::string s(buf, res.ptr);
  // Keep canonical floats distinguishable from integers.
  if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
      s.find("inf") == std::string::npos && s.find("nan") == std::string::npos) {
    s += ".0";
  }
  return s;
}

Validation validate(const std::string& toml_text) {
  Validation result;
  TomlTable table;
  try {
    table = parse_toml(toml_text);
  } catch (const TomlParseError& e) {
    result.errors.push_back(e.what());
    return result;
  }

  ExperimentConfig cfg;
  Reader r{table, &result.errors, {}};

  // method is the only key without a default.
  std::string method_str;
  r.read_string("method", &method_str);
  if (method_str.empty()) {
    r.fail("method", "missing (one of fedavg, fedreg, afed_g, afed_gan)");
  } else {
    try {
      cfg.round.method = fed::method_from_name(method_str);
    } catch (const std::invalid_argument&) {
      r.fail("method", "must be one of fedavg, fedreg, afed_g, afed_gan");
    }
  }

  {
    std::vector<double> lambdas;
    if (r.read_number_array("lambdas", &lambdas)) {
      if (lambdas.empty()) {
        r.fail("lambdas", "sweep list must be nonempty");
      } else {
        cfg.lambdas = lambdas;
      }
    }
    for (double l : cfg.lambdas) {
      if (l < 0.0) r.fail("lambdas", "values must be >= 0");
    }
    std::vector<double> seeds;
    if (r.read_number_array("seeds", &seeds)) {
      if (seeds.empty()) {
        r.fail("seeds", "sweep list must be nonempty");
      } else {
        cfg.seeds.clear();
        for (double s : seeds) {
          if (s < 0 || s != std::floor(s)) {
            r.fail("seeds", "must be non-negative integers");
            break;
          }
          cfg.seeds.push_back(static_cast<std::uint64_t>(s));
        }
      }
    }
  }

  // [dataset]
  std::string kind = "toy";
  r.read_string("dataset.kind", &kind);
  if (kind == "toy") {
    cfg.dataset.kind = DatasetKind::toy;
  } else if (kind == "csv") {
    cfg.dataset.kind = DatasetKind::csv;
  } else {
    r.fail("dataset.kind", "must be 'toy' or 'csv'");
  }
  r.read_double("dataset.test_fraction", &cfg.dataset.test_fraction);
  if (!(cfg.dataset.test_fraction > 0.0 && cfg.dataset.test_fraction < 1.0)) {
    r.fail("dataset.test_fraction", "must be in (0,1)");
  }

  {
    ToyDataCfg& toy = cfg.dataset.toy;
    r.read_size("dataset.per_client", &toy.per_client);
    r.read_int("dataset.clients", &toy.clients);
    r.read_double("dataset.dominant_fraction", &toy.dominant_fraction);
    r.read_double("dataset.cov_scale", &toy.cov_scale);
    std::vector<double> means;
    if (r.read_number_array("dataset.means", &means)) {
      if (means.size() != 8) {
        r.fail("dataset.means", "expected 8 numbers (x,y per component)");
      } else {
        std::copy(means.begin(), means.end(), toy.means.begin());
      }
    }
    std::vector<double> cells;
    if (r.read_number_array("dataset.cells", &cells)) {
      if (cells.size() != 4) {
        r.fail("dataset.cells", "expected 4 cell indices");
      } else {
        bool seen[4] = {false, false, false, false};
        for (std::size_t i = 0; i < 4; ++i) {
          const double c = cells[i];
          if (c != std::floor(c) || c < 0 || c > 3) {
            r.fail("dataset.cells", "cell indices must be 0..3");
            break;
          }
          toy.cells[i] = static_cast<int>(c);
          seen[toy.cells[i]] = true;
        }
        if (!(seen[0] && seen[1] && seen[2] && seen[3])) {
          r.fail("dataset.cells", "the four (y,a) cells must be distinct");
        }
      }
    }
    if (cfg.dataset.kind == DatasetKind::toy) {
      if (toy.per_client < 20) r.fail("dataset.per_client", "must be >= 20");
      if (toy.clients < 2) r.fail("dataset.clients", "must be >= 2");
      if (!(toy.dominant_fraction > 0.0 && toy.dominant_fraction <= 1.0)) {
        r.fail("dataset.dominant_fraction", "must be in (0,1]");
      }
      if (!(toy.cov_scale > 0.0)) r.fail("dataset.cov_scale", "must be > 0");
    }
  }

  {
    CsvDataCfg& csv = cfg.dataset.csv;
    r.read_string("dataset.path", &csv.path);
    r.read_int("dataset.partition_clients", &csv.clients);
    r.read_double("dataset.concentration", &csv.concentration);
    r.read_string("dataset.label_col", &csv.schema.label_col);
    r.read_string("dataset.attr_col", &csv.schema.attr_col);
    r.read_string("dataset.label_positive", &csv.schema.label_positive);
    r.read_string("dataset.attr_positive", &csv.schema.attr_positive);
    r.read_string_array("dataset.numeric_cols", &csv.schema.numeric_cols);
    r.read_string_array("dataset.categorical_cols",
                        &csv.schema.categorical_cols);
    if (cfg.dataset.kind == DatasetKind::csv) {
      if (csv.path.empty()) {
        r.fail("dataset.path", "missing CSV path");
      } else if (!std::filesystem::exists(csv.path)) {
        r.fail("dataset.path", "file not found: " + csv.path);
      }
      if (csv.schema.label_col.empty()) r.fail("dataset.label_col", "missing");
      if (csv.schema.attr_col.empty()) r.fail("dataset.attr_col", "missing");
      if (csv.schema.numeric_cols.empty() &&
          csv.schema.categorical_cols.empty()) {
        r.fail("dataset.numeric_cols", "need at least one feature column");
      }
      if (csv.clients < 2) r.fail("dataset.partition_clients", "must be >= 2");
      if (!(csv.concentration > 0.0)) {
        r.fail("dataset.concentration", "must be > 0");
      }
    }
  }

  // [model]
  r.read_size("model.latent_dim", &cfg.model.latent_dim);
  r.read_size("model.noise_dim", &cfg.model.noise_dim);
  r.read_size("model.head_hidden", &cfg.model.head_hidden);
  r.read_size("model.gan_hidden", &cfg.model.gan_hidden);
  r.read_bool("model.conditional_disc", &cfg.model.conditional_disc);
  {
    std::vector<double> widths;
    if (r.read_number_array("model.extractor_hidden", &widths)) {
      cfg.model.extractor_hidden.clear();
      for (double w : widths) {
        if (w != std::floor(w) || w < 1) {
          r.fail("model.extractor_hidden", "widths must be positive integers");
          break;
        }
        cfg.model.extractor_hidden.push_back(static_cast<std::size_t>(w));
      }
    }
  }
  for (const auto& [key, val] :
       std::initializer_list<std::pair<const char*, std::size_t>>{
           {"model.latent_dim", cfg.model.latent_dim},
           {"model.noise_dim", cfg.model.noise_dim},
           {"model.head_hidden", cfg.model.head_hidden},
           {"model.gan_hidden", cfg.model.gan_hidden}}) {
    if (val == 0) r.fail(key, "must be >= 1");
  }

  // [round]
  r.read_int("round.rounds", &cfg.round.rounds);
  r.read_int("round.t1", &cfg.round.t1);
  r.read_int("round.t2", &cfg.round.t2);
  r.read_double("round.participant_ratio", &cfg.round.participant_ratio);
  r.read_double("round.lr_eta", &cfg.round.lr_eta);
  r.read_double("round.lr_beta", &cfg.round.lr_beta);
  r.read_double("round.lr_g", &cfg.round.lr_g);
  r.read_double("round.lr_d", &cfg.round.lr_d);
  r.read_double("round.lr_server_g", &cfg.round.lr_server_g);
  r.read_int("round.server_g_steps", &cfg.round.server_g_steps);
  r.read_size("round.server_g_batch", &cfg.round.server_g_batch);
  r.read_double("round.beta_alpha", &cfg.round.beta_alpha);
  if (cfg.round.rounds < 1) r.fail("round.rounds", "must be >= 1");
  if (cfg.round.t1 < 1) r.fail("round.t1", "must be >= 1");
  if (cfg.round.t2 < 1) r.fail("round.t2", "must be >= 1");
  if (!(cfg.round.participant_ratio > 0.0 &&
        cfg.round.participant_ratio <= 1.0)) {
    r.fail("round.participant_ratio", "must be in (0,1]");
  }
  if (!(cfg.round.beta_alpha > 0.0)) r.fail("round.beta_alpha", "must be > 0");
  for (const auto& [key, val] :
       std::initializer_list<std::pair<const char*, double>>{
           {"round.lr_eta", cfg.round.lr_eta},
           {"round.lr_beta", cfg.round.lr_beta},
           {"round.lr_g", cfg.round.lr_g},
           {"round.lr_d", cfg.round.lr_d},
           {"round.lr_server_g", cfg.round.lr_server_g}}) {
    if (!(val > 0.0)) r.fail(key, "must be > 0");
  }
  if (cfg.round.server_g_steps < 0) {
    r.fail("round.server_g_steps", "must be >= 0");
  }
  {
    std::string opt = "adam";
    r.read_string("round.classifier_opt", &opt);
    if (opt == "adam") {
      cfg.round.classifier_opt = nn::OptKind::adam;
    } else if (opt == "sgd") {
      cfg.round.classifier_opt = nn::OptKind::sgd;
    } else if (opt == "rmsprop") {
      cfg.round.classifier_opt = nn::OptKind::rmsprop;
    } else {
      r.fail("round.classifier_opt", "must be adam, sgd, or rmsprop");
    }
    std::string gl = "nonsaturating";
    r.read_string("round.gan_loss", &gl);
    if (gl == "nonsaturating") {
      cfg.round.gan_loss = fed::GanLossKind::nonsaturating;
    } else if (gl == "paper_saturating") {
      cfg.round.gan_loss = fed::GanLossKind::paper_saturating;
    } else {
      r.fail("round.gan_loss", "must be nonsaturating or paper_saturating");
    }
    std::string pm = "signed";
    r.read_string("round.penalty_mode", &pm);
    if (pm == "signed") {
      cfg.round.penalty_mode = fairness::PenaltyMode::signed_mean;
    } else if (pm == "abs") {
      cfg.round.penalty_mode = fairness::PenaltyMode::abs_canonical;
    } else {
      r.fail("round.penalty_mode", "must be signed or abs");
    }
  }

  // [output]
  r.read_string("output.trace", &cfg.output.trace);
  r.read_string("output.summary", &cfg.output.summary);
  r.read_string("output.checkpoint_dir", &cfg.output.checkpoint_dir);
  r.read_int("output.checkpoint_every", &cfg.output.checkpoint_every);
  if (cfg.output.trace.empty()) r.fail("output.trace", "must not be empty");
  if (cfg.output.summary.empty()) r.fail("output.summary", "must not be empty");
  if (cfg.output.checkpoint_every < 0) {
    r.fail("output.checkpoint_every", "must be >= 0");
  }

  // Reject unknown keys so typos are named rather than ignored.
  {
    std::sort(r.consumed.begin(), r.consumed.end());
    for (const auto& [key, val] : table) {
      if (!std::binary_search(r.consumed.begin(), r.consumed.end(), key)) {
        result.errors.push_back(key + ": unknown key");
      }
    }
  }

  if (result.errors.empty()) result.config = std::move(cfg);
  return result;
}

namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

template <typename T, typename F>
std::string join_array(const std::vector<T>& v, F f) {
  std::string out = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += f(v[i]);
  }
  out += "]";
  return out;
}

}  // namespace

std::string canonical_toml(const ExperimentConfig& cfg) {
  std::ostringstream out;
  out << "method = " << quote(fed::method_name(cfg.round.method)) << "\n";
  out << "lambdas = "
      << join_array(cfg.lambdas, [](double v) { return format_double(v); })
      << "\n";
  out << "seeds = "
      << join_array(cfg.seeds,
                    [](std::uint64_t s) { return std::to_string(s); })
      << "\n";

  out << "\n[dataset]\n";
  out << "kind = "
      << quote(cfg.dataset.kind == DatasetKind::toy ? "toy" : "csv") << "\n";
  out << "test_fraction = " << format_double(cfg.dataset.test_fraction) << "\n";
  if (cfg.dataset.kind == DatasetKind::toy) {
    const ToyDataCfg& toy = cfg.dataset.toy;
    out << "per_client = " << toy.per_client << "\n";
    out << "clients = " << toy.clients << "\n";
    out << "dominant_fraction = " << format_double(toy.dominant_fraction)
        << "\n";
    out << "cov_scale = " << format_double(toy.cov_scale) << "\n";
    out << "means = "
        << join_array(std::vector<double>(toy.means.begin(), toy.means.end()),
                      [](double v) { return format_double(v); })
        << "\n";
    out << "cells = "
        << join_array(std::vector<int>(toy.cells.begin(), toy.cells.end()),
                      [](int v) { return std::to_string(v); })
        << "\n";
  } else {
    const CsvDataCfg& csv = cfg.dataset.csv;
    out << "path = " << quote(csv.path) << "\n";
    out << "partition_clients = " << csv.clients << "\n";
    out << "concentration = " << format_double(csv.concentration) << "\n";
    out << "label_col = " << quote(csv.schema.label_col) << "\n";
    out << "attr_col = " << quote(csv.schema.attr_col) << "\n";
    out << "label_positive = " << quote(csv.schema.label_positive) << "\n";
    out << "attr_positive = " << quote(csv.schema.attr_positive) << "\n";
    out << "numeric_cols = "
        << join_array(csv.schema.numeric_cols,
                      [](const std::string& s) { return quote(s); })
        << "\n";
    out << "categorical_cols = "
        << join_array(csv.schema.categorical_cols,
                      [](const std::string& s) { return quote(s); })
        << "\n";
  }

  out << "\n[model]\n";
  out << "latent_dim = " << cfg.model.latent_dim << "\n";
  out << "noise_dim = " << cfg.model.noise_dim << "\n";
  out << "head_hidden = " << cfg.model.head_hidden << "\n";
  out << "gan_hidden = " << cfg.model.gan_hidden << "\n";
  out << "extractor_hidden = "
      << join_array(std::vector<std::size_t>(cfg.model.extractor_hidden.begin(),
                                             cfg.model.extractor_hidden.end()),
                    [](std::size_t v) { return std::to_string(v); })
      << "\n";
  out << "conditional_disc = "
      << (cfg.model.conditional_disc ? "true" : "false") << "\n";

  const fed::RoundConfig& rc = cfg.round;
  out << "\n[round]\n";
  out << "rounds = " << rc.rounds << "\n";
  out << "t1 = " << rc.t1 << "\n";
  out << "t2 = " << rc.t2 << "\n";
  out << "participant_ratio = " << format_double(rc.participant_ratio) << "\n";
  out << "lr_eta = " << format_double(rc.lr_eta) << "\n";
  out << "lr_beta = " << format_double(rc.lr_beta) << "\n";
  out << "lr_g = " << format_double(rc.lr_g) << "\n";
  out << "lr_d = " << format_double(rc.lr_d) << "\n";
  out << "lr_server_g = " << format_double(rc.lr_server_g) << "\n";
  out << "server_g_steps = " << rc.server_g_steps << "\n";
  out << "server_g_batch = " << rc.server_g_batch << "\n";
  out << "beta_alpha = " << format_double(rc.beta_alpha) << "\n";
  out << "classifier_opt = "
      << quote(rc.classifier_opt == nn::OptKind::adam     ? "adam"
               : rc.classifier_opt == nn::OptKind::sgd    ? "sgd"
                                                          : "rmsprop")
      << "\n";
  out << "gan_loss = "
      << quote(rc.gan_loss == fed::GanLossKind::nonsaturating
                   ? "nonsaturating"
                   : "paper_saturating")
      << "\n";
  out << "penalty_mode = "
      << quote(rc.penalty_mode == fairness::PenaltyMode::signed_mean ? "signed"
                                                                     : "abs")
      << "\n";

  out << "\n[output]\n";
  out << "trace = " << quote(cfg.output.trace) << "\n";
  out << "summary = " << quote(cfg.output.summary) << "\n";
  if (!cfg.output.checkpoint_dir.empty()) {
    out << "checkpoint_dir = " << quote(cfg.output.checkpoint_dir) << "\n";
  }
  out << "checkpoint_every = " << cfg.output.checkpoint_every << "\n";
  return out.str();
}

}  // namespace afed::cli
