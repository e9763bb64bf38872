// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

// Experiment specs: a JSON document listing runs. Each run names a workload, how to
// obtain its tensors (seeded generator or .mtx files), the machine configuration and
// the placement strategy. A run that lists several modes expands into one run per mode.

#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "nexus/csr.hpp"
#include "nexus/engine.hpp"
#include "nexus/error.hpp"
#include "nexus/generators.hpp"
#include "nexus/report.hpp"
#include "nexus/workloads.hpp"

namespace nexus {

inline constexpr std::uint64_t kDefaultSeed = 1;

struct RunSpec {
  std::string name;
  std::string workload;  // spmv, spmspm, spadd, sddmm, matmul, skew_spmv
  Mode mode = Mode::kNexus;
  PlacementStrategy placement = PlacementStrategy::kNnzBalanced;
  SimConfig config;
  std::size_t rows = 32, cols = 32, inner = 16;
  double density = 0.13;
  std::optional<double> density_b;
  std::optional<SparsityMix> mix;
  double hot_share = 0.6;
  std::optional<std::string> mtx, mtx_b;
  std::uint64_t seed = kDefaultSeed;
};

struct Emit {
  bool json = true, csv = false, svg = false, trace = false;
};

struct ExperimentSpec {
  std::vector<RunSpec> runs;
  std::filesystem::path output_dir = "nexus_out";
  Emit emit;
  std::size_t jobs = 0;  // 0 = hardware concurrency
};

inline bool parse_mesh(const std::string& s, Mesh& out) {
  const auto x = s.find('x');
  if (x == std::string::npos) return false;
  try {
    std::size_t used = 0;
    const int w = std::stoi(s.substr(0, x), &used);
    if (used != x) return false;
    const int h = std::stoi(s.substr(x + 1), &used);
    if (used != s.size() - x - 1 || w < 1 || h < 1) return false;
    out = Mesh{w, h};
    return true;
  } catch (const std::exception&) {
    return false;
  }
}

inline std::string mesh_name(const Mesh& m) { return std::to_string(m.width) + "x" + std::to_string(m.height); }

inline Emit parse_emit(const std::vector<std::string>& items) {
  Emit e{false, false, false, false};
  for (const auto& i : items) {
    if (i == "json") e.json = true;
    else if (i == "csv") e.csv = true;
    else if (i == "svg") e.svg = true;
    else if (i == "trace") e.trace = true;
    else throw Error(ErrorCode::kInvalidInput, "unknown emit kind '" + i + "'");
  }
  return e;
}

inline const std::vector<std::string>& known_workloads() {
  static const std::vector<std::string> k = {"spmv", "spmspm", "spadd", "sddmm", "matmul", "skew_spmv"};
  return k;
}

inline void validate_run(const RunSpec& r) {
  auto bad = [&](const std::string& why) { throw Error(ErrorCode::kInvalidInput, "run '" + r.name + "': " + why); };
  if (std::find(known_workloads().begin(), known_workloads().end(), r.workload) == known_workloads().end()) {
    bad("unknown workload '" + r.workload + "'");
  }
  if (r.rows < 1 || r.cols < 1 || r.inner < 1) bad("dims must be positive");
  if (r.density < 0 || r.density > 1 || (r.density_b && (*r.density_b < 0 || *r.density_b > 1))) {
    bad("density must lie in [0,1]");
  }
  if (r.hot_share <= 0 || r.hot_share > 1) bad("hot_share must lie in (0,1]");
  for (const auto* p : {&r.mtx, &r.mtx_b}) {
    if (*p && !std::filesystem::is_regular_file(**p)) bad("missing matrix file " + **p);
  }
  try {
    r.config.validate();
  } catch (const Error& e) {
    bad(e.what());
  }
}

// Reads one run object. Seeds fall back to NEXUS_SEED, then to the default.
inline std::vector<RunSpec> runs_from_json(const nlohmann::json& j, std::size_t index,
                                           const std::filesystem::path& base_dir) {
  RunSpec r;
  r.workload = j.value("workload", "spmv");
  r.name = j.value("name", r.workload + "_" + std::to_string(index));
  r.rows = j.value("rows", r.rows);
  r.cols = j.value("cols", r.cols);
  r.inner = j.value("inner", r.inner);
  r.density = j.value("density", r.density);
  if (j.contains("density_b")) r.density_b = j.at("density_b").get<double>();
  r.hot_share = j.value("hot_share", r.hot_share);
  if (j.contains("mix")) {
    SparsityMix m;
    if (!parse_mix(j.at("mix").get<std::string>(), m)) throw Error(ErrorCode::kInvalidInput, "unknown mix");
    r.mix = m;
  }
  auto path = [&](const char* key) -> std::optional<std::string> {
    if (!j.contains(key)) return std::nullopt;
    std::filesystem::path p = j.at(key).get<std::string>();
    return (p.is_relative() ? base_dir / p : p).string();
  };
  r.mtx = path("mtx");
  r.mtx_b = path("mtx_b");
  if (j.contains("seed")) {
    r.seed = j.at("seed").get<std::uint64_t>();
  } else if (const char* env = std::getenv("NEXUS_SEED")) {
    r.seed = std::strtoull(env, nullptr, 10);
  }
  if (!parse_strategy(j.value("placement", "nnz_balanced"), r.placement)) {
    throw Error(ErrorCode::kInvalidInput, "unknown placement " + j.at("placement").dump());
  }
  if (j.contains("mesh") && !parse_mesh(j.at("mesh").get<std::string>(), r.config.mesh)) {
    throw Error(ErrorCode::kInvalidInput, "bad mesh " + j.at("mesh").dump());
  }
  r.config.cycle_ceiling = j.value("cycle_ceiling", r.config.cycle_ceiling);
  r.config.memory_words = j.value("memory_words", r.config.memory_words);
  r.config.am_queue_capacity = j.value("am_queue_capacity", r.config.am_queue_capacity);
  if (j.contains("bandwidth") && !j.at("bandwidth").is_null()) r.config.bandwidth = j.at("bandwidth").get<double>();
  if (j.contains("tile_rows") && !j.at("tile_rows").is_null()) r.config.tile_rows = j.at("tile_rows").get<std::size_t>();
  r.config.seed = r.seed;

  std::vector<std::string> modes;
  if (j.contains("modes")) {
    modes = j.at("modes").get<std::vector<std::string>>();
  } else {
    modes.push_back(j.value("mode", "nexus"));
  }
  std::vector<RunSpec> out;
  for (const auto& m : modes) {
    RunSpec x = r;
    if (!parse_mode(m, x.mode)) throw Error(ErrorCode::kInvalidInput, "unknown mode '" + m + "'");
    x.config.mode = x.mode;
    out.push_back(std::move(x));
  }
  return out;
}

inline ExperimentSpec spec_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = ".") {
  ExperimentSpec spec;
  try {
    if (j.contains("output_dir")) spec.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("emit")) spec.emit = parse_emit(j.at("emit").get<std::vector<std::string>>());
    spec.jobs = j.value("jobs", std::size_t{0});
    const auto& runs = j.at("runs");
    for (std::size_t i = 0; i < runs.size(); ++i) {
      for (auto& r : runs_from_json(runs[i], i, base_dir)) spec.runs.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  return spec;
}

inline ExperimentSpec load_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open spec " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  return spec_from_json(j, path.parent_path());
}

// Tensors are drawn from one generator seeded by the run seed, in a fixed order.
inline WorkloadInstance make_instance(const RunSpec& r) {
  Rng rng(r.seed);
  auto matrix = [&](const std::optional<std::string>& path, std::size_t m, std::size_t n, double d) {
    return path ? read_matrix_market(*path) : random_csr(m, n, d, rng);
  };
  const double db = r.density_b.value_or(r.density);
  if (r.workload == "spmv") {
    CsrMatrix x = matrix(r.mtx, r.rows, r.cols, r.density);
    auto y = random_vector(x.cols, rng);
    return build_spmv(std::move(x), std::move(y));
  }
  if (r.workload == "skew_spmv") {
    CsrMatrix x = skew_matrix(r.rows, r.cols, r.rows / 2, r.hot_share, rng);
    auto y = random_vector(x.cols, rng);
    return build_spmv(std::move(x), std::move(y));
  }
  if (r.workload == "spmspm") {
    double da = r.density, dbb = db;
    if (r.mix) std::tie(da, dbb) = sample_mix(*r.mix, rng);
    CsrMatrix a = matrix(r.mtx, r.rows, r.inner, da);
    CsrMatrix b = matrix(r.mtx_b, a.cols, r.cols, dbb);
    return build_spmspm(std::move(a), std::move(b));
  }
  if (r.workload == "spadd") {
    CsrMatrix a = matrix(r.mtx, r.rows, r.cols, r.density);
    CsrMatrix b = matrix(r.mtx_b, a.rows, a.cols, db);
    return build_spadd(std::move(a), std::move(b));
  }
  if (r.workload == "sddmm") {
    CsrMatrix s = matrix(r.mtx, r.rows, r.cols, r.density);
    DenseMatrix u = random_dense(s.rows, r.inner, rng);
    DenseMatrix v = random_dense(r.inner, s.cols, rng);
    return build_sddmm(std::move(s), std::move(u), std::move(v));
  }
  if (r.workload == "matmul") {
    DenseMatrix a = random_dense(r.rows, r.inner, rng);
    DenseMatrix b = random_dense(r.inner, r.cols, rng);
    return build_dense_matmul(std::move(a), std::move(b));
  }
  throw Error(ErrorCode::kInvalidInput, "unknown workload '" + r.workload + "'");
}

inline nlohmann::json run_record(const RunSpec& r) {
  nlohmann::json j = {{"name", r.name},
                      {"workload", r.workload},
                      {"mode", std::string(mode_name(r.mode))},
                      {"mesh", mesh_name(r.config.mesh)},
                      {"placement", std::string(strategy_name(r.placement))},
                      {"seed", r.seed},
                      {"rows", r.rows},
                      {"cols", r.cols},
                      {"inner", r.inner},
                      {"density", r.density},
                      {"cycle_ceiling", r.config.cycle_ceiling},
                      {"memory_words", r.config.memory_words},
                      {"am_queue_capacity", r.config.am_queue_capacity}};
  j["density_b"] = r.density_b ? nlohmann::json(*r.density_b) : nlohmann::json(nullptr);
  j["bandwidth"] = std::isinf(r.config.bandwidth) ? nlohmann::json("inf") : nlohmann::json(r.config.bandwidth);
  j["tile_rows"] = r.config.tile_rows ? nlohmann::json(*r.config.tile_rows) : nlohmann::json(nullptr);
  if (r.mix) j["mix"] = "S" + std::to_string(static_cast<int>(*r.mix) + 1);
  if (r.workload == "skew_spmv") j["hot_share"] = r.hot_share;
  if (r.mtx) j["mtx"] = std::filesystem::path(*r.mtx).filename().string();
  if (r.mtx_b) j["mtx_b"] = std::filesystem::path(*r.mtx_b).filename().string();
  return j;
}

struct RunOutcome {
  RunSpec spec;
  bool ok = false;
  std::string error;
  nlohmann::json stats;  // empty when the run failed before simulating
  std::string trace;
};

inline RunOutcome execute_run(const RunSpec& r, bool want_trace) {
  RunOutcome out;
  out.spec = r;
  try {
    const WorkloadInstance w = make_instance(r);
    std::ostringstream trace;
    TraceSink sink;
    if (want_trace) sink = [&](const TraceEvent& e) { trace << format_trace(e) << '\n'; };
    const WorkloadRun run = run_workload(w, r.config, r.placement, sink);
    const bool matches = run.output == w.oracle();
    nlohmann::json rec = run_record(r);
    rec["tile_rows_used"] = run.tile_rows;
    rec["tile_cols_used"] = run.tile_cols;
    rec["tiles"] = run.tiles;
    rec["static_ams"] = run.static_ams;
    out.stats = stats_to_json(run.stats, r.config.mesh, rec);
    out.stats["output_matches_oracle"] = matches;
    out.trace = trace.str();
    out.ok = run.stats.completed && matches;
    if (!run.stats.completed) out.error = "timeout at cycle ceiling " + std::to_string(r.config.cycle_ceiling);
    else if (!matches) out.error = "output differs from the reference oracle";
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

inline std::string file_stem(const RunSpec& r) { return r.name + "__" + std::string(mode_name(r.mode)); }

// One row per run name, every metric normalized to that name's nexus run.
inline nlohmann::json summarize(const std::vector<RunOutcome>& outcomes) {
  nlohmann::json rows = nlohmann::json::array();
  std::vector<std::string> names;
  for (const auto& o : outcomes) {
    if (std::find(names.begin(), names.end(), o.spec.name) == names.end()) names.push_back(o.spec.name);
  }
  for (const auto& name : names) {
    const RunOutcome* base = nullptr;
    for (const auto& o : outcomes) {
      if (o.spec.name == name && o.spec.mode == Mode::kNexus && o.ok) base = &o;
    }
    nlohmann::json row = {{"name", name}, {"modes", nlohmann::json::object()}};
    for (const auto& o : outcomes) {
      if (o.spec.name != name) continue;
      nlohmann::json m = {{"ok", o.ok}};
      if (!o.stats.is_null()) {
        const auto& s = o.stats;
        m["cycles"] = s.at("cycles");
        m["utilization"] = s.at("utilization");
        m["innetwork_fraction"] = s.at("innetwork_fraction");
        m["total_stalls"] = s.at("total_stalls");
        m["traffic_bits"] = s.at("traffic_bits");
        if (base) {
          auto ratio = [](double a, double b) { return b == 0 ? nlohmann::json(nullptr) : nlohmann::json(a / b); };
          const auto& b = base->stats;
          m["cycles_vs_nexus"] = ratio(s.at("cycles").get<double>(), b.at("cycles").get<double>());
          m["utilization_vs_nexus"] = ratio(s.at("utilization").get<double>(), b.at("utilization").get<double>());
          m["stalls_vs_nexus"] = ratio(s.at("total_stalls").get<double>(), b.at("total_stalls").get<double>());
          m["traffic_vs_nexus"] = ratio(s.at("traffic_bits").get<double>(), b.at("traffic_bits").get<double>());
        }
      } else {
        m["error"] = o.error;
      }
      row["modes"][std::string(mode_name(o.spec.mode))] = m;
    }
    rows.push_back(row);
  }
  return {{"schema", "nexus.summary/1"}, {"rows", rows}};
}

inline std::string summary_csv(const nlohmann::json& summary) {
  std::ostringstream os;
  os << "name,mode,ok,cycles,utilization,innetwork_fraction,total_stalls,traffic_bits,cycles_vs_nexus\n";
  for (const auto& row : summary.at("rows")) {
    for (const auto& [mode, m] : row.at("modes").items()) {
      os << row.at("name").get<std::string>() << ',' << mode << ',' << (m.at("ok").get<bool>() ? 1 : 0);
      for (const char* k : {"cycles", "utilization", "innetwork_fraction", "total_stalls", "traffic_bits",
                            "cycles_vs_nexus"}) {
        os << ',' << (m.contains(k) && !m.at(k).is_null() ? m.at(k).dump() : "");
      }
      os << '\n';
    }
  }
  return os.str();
}

inline void write_file(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw Error(ErrorCode::kInvalidInput, "cannot write " + p.string());
  out << content;
}

struct ExperimentResult {
  std::vector<RunOutcome> outcomes;
  nlohmann::json summary;
  int exit_code = 0;
};

// Validates everything first, then runs on a worker pool. Each run writes only its own
// files; the summary is written after all runs have joined.
inline ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.runs.empty()) throw Error(ErrorCode::kInvalidInput, "spec has no runs");
  for (const auto& r : spec.runs) validate_run(r);
  std::vector<std::string> stems;
  for (const auto& r : spec.runs) {
    if (std::find(stems.begin(), stems.end(), file_stem(r)) != stems.end()) {
      throw Error(ErrorCode::kInvalidInput, "duplicate run '" + file_stem(r) + "'");
    }
    stems.push_back(file_stem(r));
  }
  std::filesystem::create_directories(spec.output_dir);

  ExperimentResult result;
  result.outcomes.resize(spec.runs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < spec.runs.size(); i = next++) {
      RunOutcome o = execute_run(spec.runs[i], spec.emit.trace);
      const auto stem = spec.output_dir / file_stem(o.spec);
      if (!o.stats.is_null()) {
        if (spec.emit.json) write_file(stem.string() + ".stats.json", o.stats.dump(2) + "\n");
        if (spec.emit.csv) write_file(stem.string() + ".busy.csv", busy_csv(o.stats));
        if (spec.emit.svg) write_file(stem.string() + ".heatmap.svg", heatmap_svg(o.stats));
        if (spec.emit.trace) write_file(stem.string() + ".trace.txt", o.trace);
      }
      o.trace.clear();
      result.outcomes[i] = std::move(o);
    }
  };
  std::size_t jobs = spec.jobs ? spec.jobs : std::max(1u, std::thread::hardware_concurrency());
  jobs = std::min(jobs, spec.runs.size());
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  result.summary = summarize(result.outcomes);
  write_file(spec.output_dir / "summary.json", result.summary.dump(2) + "\n");
  write_file(spec.output_dir / "summary.csv", summary_csv(result.summary));
  for (const auto& o : result.outcomes) {
    if (!o.ok) result.exit_code = 1;
  }
  return result;
}

}  // namespace nexus
