#pragma once

// Grid sweeps over experiment configurations.
//
// Grid spec (JSON):
//   {
//     "base": { ...experiment config without mapping-specific fields... },
//     "axes": [ { "key": "mapping", "values": ["softmax", "rsoftmax"] },
//               { "key": "data.n_classes", "values": [10, 20, 30] } ],
//     "mapping_options": { "softmax": { "thresholds": [0.05, 0.1] } },
//     "x_axis": "data.n_classes"
//   }
//
// Cells are the cross-product of the axes, first axis slowest. Each finished
// cell is stored as <out>/cells/<hash>.json, keyed by a hash of its effective
// config, and is skipped when the sweep is rerun.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "rsoftmax/experiment.hpp"

namespace rsoftmax {

struct SweepAxis {
  std::string key;  // dotted path into the config, e.g. "data.mean_labels"
  std::vector<json> values;
};

struct SweepSpec {
  json base = json::object();
  std::vector<SweepAxis> axes;
  json mapping_options = json::object();
  std::string x_axis;
};

inline SweepSpec sweep_from_json(const json& j) {
  detail::reject_unknown(j, {"base", "axes", "mapping_options", "x_axis"}, "sweep spec");
  SweepSpec s;
  if (j.contains("base")) s.base = j.at("base");
  if (!s.base.is_object()) throw ConfigError("sweep 'base' must be an object");
  if (j.contains("mapping_options")) s.mapping_options = j.at("mapping_options");
  if (!s.mapping_options.is_object()) throw ConfigError("sweep 'mapping_options' must be an object");
  if (!j.contains("axes") || !j.at("axes").is_array() || j.at("axes").empty()) {
    throw ConfigError("sweep 'axes' must be a non-empty array");
  }
  for (const auto& a : j.at("axes")) {
    detail::reject_unknown(a, {"key", "values"}, "sweep axis");
    SweepAxis axis;
    axis.key = detail::read_field<std::string>(a, "key", "");
    if (axis.key.empty()) throw ConfigError("sweep axis needs a key");
    if (!a.contains("values") || !a.at("values").is_array() || a.at("values").empty()) {
      throw ConfigError("sweep axis '" + axis.key + "' needs a non-empty 'values' array");
    }
    for (const auto& v : a.at("values")) axis.values.push_back(v);
    s.axes.push_back(std::move(axis));
  }
  s.x_axis = detail::read_field<std::string>(j, "x_axis", "");
  if (s.x_axis.empty()) {
    for (const auto& a : s.axes) {
      if (a.key != "mapping") {
        s.x_axis = a.key;
        break;
      }
    }
    if (s.x_axis.empty()) s.x_axis = s.axes.front().key;
  }
  bool found = false;
  for (const auto& a : s.axes) found = found || a.key == s.x_axis;
  if (!found) throw ConfigError("x_axis '" + s.x_axis + "' is not a sweep axis");
  return s;
}

inline std::size_t cell_count(const SweepSpec& s) {
  std::size_t n = 1;
  for (const auto& a : s.axes) n *= a.values.size();
  return n;
}

inline void set_dotted(json& j, const std::string& key, const json& value) {
  json* cur = &j;
  std::size_t start = 0;
  for (std::size_t dot; (dot = key.find('.', start)) != std::string::npos; start = dot + 1) {
    cur = &(*cur)[key.substr(start, dot - start)];
  }
  (*cur)[key.substr(start)] = value;
}

struct SweepCell {
  std::size_t index = 0;
  std::vector<json> axis_values;
  json raw_config;  // base + axis values + mapping options
};

inline std::vector<SweepCell> expand_cells(const SweepSpec& s) {
  std::vector<SweepCell> cells(cell_count(s));
  for (std::size_t idx = 0; idx < cells.size(); ++idx) {
    auto& cell = cells[idx];
    cell.index = idx;
    cell.raw_config = s.base;
    std::size_t rem = idx;
    cell.axis_values.resize(s.axes.size());
    for (std::size_t a = s.axes.size(); a-- > 0;) {
      const auto& axis = s.axes[a];
      cell.axis_values[a] = axis.values[rem % axis.values.size()];
      rem /= axis.values.size();
    }
    for (std::size_t a = 0; a < s.axes.size(); ++a) set_dotted(cell.raw_config, s.axes[a].key, cell.axis_values[a]);
    const std::string mapping = cell.raw_config.value("mapping", std::string("rsoftmax"));
    if (s.mapping_options.contains(mapping)) {
      for (const auto& [k, v] : s.mapping_options.at(mapping).items()) cell.raw_config[k] = v;
    }
  }
  return cells;
}

// FNV-1a 64 over the canonical dump, as 16 hex digits.
inline std::string config_hash(const json& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

struct CellResult {
  std::size_t index = 0;
  std::string hash;
  bool ok = false;
  bool resumed = false;
  json config;  // effective config when valid, raw otherwise
  json report;  // null on error
  std::string error;
  std::vector<json> axis_values;
};

inline json cell_json(const CellResult& c) {
  return {{"index", c.index},
          {"hash", c.hash},
          {"status", c.ok ? "ok" : "error"},
          {"config", c.config},
          {"report", c.report},
          {"error", c.error}};
}

namespace detail {

inline std::string csv_value(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  return v.dump();
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << text;
}

}  // namespace detail

inline CellResult run_cell(const SweepCell& cell, const std::filesystem::path& cell_dir) {
  CellResult r;
  r.index = cell.index;
  r.axis_values = cell.axis_values;
  ExperimentConfig cfg;
  try {
    cfg = experiment_from_json(cell.raw_config);
    r.config = to_json(cfg);
  } catch (const Error& e) {
    r.config = cell.raw_config;
    r.hash = config_hash(r.config);
    r.error = e.what();
    return r;
  }
  r.hash = config_hash(r.config);
  const auto path = cell_dir / (r.hash + ".json");
  if (std::filesystem::exists(path)) {
    try {
      std::ifstream in(path);
      json stored = json::parse(in);
      if (stored.value("status", "") == "ok" && stored.at("config") == r.config) {
        r.ok = true;
        r.resumed = true;
        r.report = stored.at("report");
        return r;
      }
    } catch (const json::exception&) {
      // unreadable cell file: rerun the cell
    }
  }
  try {
    r.report = to_json(run_experiment(cfg));
    r.ok = true;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  detail::write_text(path, cell_json(r).dump(2) + "\n");
  return r;
}

// Plot-ready table: one row per cell, x = the x_axis value, y = headline
// micro-F1, series = mapping.
inline std::string sweep_csv(const SweepSpec& s, const std::vector<CellResult>& cells) {
  std::ostringstream os;
  os.precision(17);
  os << "cell,hash,status,series";
  for (const auto& a : s.axes) os << ',' << a.key;
  os << ",x,micro_f1,macro_f1,sample_f1,best_epoch,headline_rule,error\n";
  std::size_t x_index = 0;
  for (std::size_t a = 0; a < s.axes.size(); ++a) {
    if (s.axes[a].key == s.x_axis) x_index = a;
  }
  for (const auto& c : cells) {
    os << c.index << ',' << c.hash << ',' << (c.ok ? "ok" : "error") << ','
       << c.config.value("mapping", std::string("rsoftmax"));
    for (const auto& v : c.axis_values) os << ',' << detail::csv_value(v);
    os << ',' << detail::csv_value(c.axis_values[x_index]) << ',';
    if (c.ok) {
      const auto& h = c.report.at("headline");
      os << h.at("micro").get<double>() << ',' << h.at("macro").get<double>() << ','
         << h.at("sample").get<double>() << ',' << h.at("epoch").get<std::size_t>() << ','
         << h.at("rule").get<std::string>() << ',';
    } else {
      std::string msg = c.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      os << ",,,,," << msg;
    }
    os << '\n';
  }
  return os.str();
}

struct SweepResult {
  std::vector<CellResult> cells;
  std::string csv;
};

// Runs every cell, `jobs` at a time, and writes <out>/results.csv and
// <out>/sweep.json. Failed cells are recorded and the sweep continues.
inline SweepResult run_sweep(const SweepSpec& spec, const std::filesystem::path& out_dir, std::size_t jobs = 1) {
  const auto cell_dir = out_dir / "cells";
  std::filesystem::create_directories(cell_dir);
  const auto cells = expand_cells(spec);
  SweepResult result;
  result.cells.resize(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) result.cells[i] = run_cell(cells[i], cell_dir);
  };
  jobs = std::max<std::size_t>(1, std::min(jobs, cells.size()));
  if (jobs == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  result.csv = sweep_csv(spec, result.cells);
  detail::write_text(out_dir / "results.csv", result.csv);
  json summary = json::array();
  for (const auto& c : result.cells) summary.push_back(cell_json(c));
  detail::write_text(out_dir / "sweep.json", summary.dump(2) + "\n");
  return result;
}

}  // namespace rsoftmax
