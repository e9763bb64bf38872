// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

// nexus: run experiment specs or single ad-hoc runs.
//
//   nexus --spec sweep.json
//   nexus --workload spmv --mode all --mesh 4x4 --density 0.13 --seed 3 --emit json,svg
//   nexus --lower kernel.json          (print the lowered config table)
//
// Exit status: 0 success, 1 a run failed, 2 the spec or flags are invalid.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "nexus/compiler.hpp"
#include "nexus/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRunFailed = 1;
constexpr int kExitInvalid = 2;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Overrides {
  std::optional<std::string> workload, mode, mesh, placement, mtx, mtx_b, mix;
  std::optional<double> density, density_b, bandwidth;
  std::optional<std::uint64_t> seed, cycle_ceiling;
  std::optional<std::size_t> rows, cols, inner, tile_rows;
};

// Writes every given flag into the run object, so flags beat spec fields.
void apply_overrides(const Overrides& o, nlohmann::json& run) {
  auto set = [&](const char* key, const auto& v) {
    if (v) run[key] = *v;
  };
  set("workload", o.workload);
  set("mesh", o.mesh);
  set("placement", o.placement);
  set("mtx", o.mtx);
  set("mtx_b", o.mtx_b);
  set("mix", o.mix);
  set("density", o.density);
  set("density_b", o.density_b);
  set("bandwidth", o.bandwidth);
  set("seed", o.seed);
  set("cycle_ceiling", o.cycle_ceiling);
  set("rows", o.rows);
  set("cols", o.cols);
  set("inner", o.inner);
  set("tile_rows", o.tile_rows);
  if (o.mode) {
    run.erase("mode");
    run["modes"] = *o.mode == "all" ? std::vector<std::string>{"nexus", "tia", "tia_valiant"} : split_csv(*o.mode);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cycle-level simulator for an active-message CGRA with in-network execution"};
  std::optional<std::string> spec_path, lower_path, out_dir, emit;
  std::optional<std::size_t> jobs;
  Overrides o;
  app.add_option("--spec", spec_path, "Experiment spec (JSON)");
  app.add_option("--lower", lower_path, "Lower a kernel descriptor (JSON) and print its config table");
  app.add_option("--workload", o.workload, "spmv | spmspm | spadd | sddmm | matmul | skew_spmv");
  app.add_option("--mode", o.mode, "nexus | tia | tia_valiant | all, or a comma list");
  app.add_option("--mesh", o.mesh, "Mesh size WxH, at most 16 PEs");
  app.add_option("--density", o.density, "Density of the first tensor");
  app.add_option("--density-b", o.density_b, "Density of the second tensor");
  app.add_option("--mix", o.mix, "SpMSpM sparsity class S1..S4");
  app.add_option("--seed", o.seed, "Seed for tensor generation and Valiant routing");
  app.add_option("--rows", o.rows, "Output rows");
  app.add_option("--cols", o.cols, "Output columns");
  app.add_option("--inner", o.inner, "Inner dimension (SpMSpM, SDDMM, MatMul)");
  app.add_option("--mtx", o.mtx, "Matrix Market file for the first tensor");
  app.add_option("--mtx-b", o.mtx_b, "Matrix Market file for the second tensor");
  app.add_option("--placement", o.placement, "nnz_balanced | dissimilarity");
  app.add_option("--tile-rows", o.tile_rows, "Fixed tile row count (default: automatic)");
  app.add_option("--bandwidth", o.bandwidth, "Off-chip loading bandwidth in bytes/cycle (default: unlimited)");
  app.add_option("--cycle-ceiling", o.cycle_ceiling, "Timeout ceiling in cycles");
  app.add_option("--out", out_dir, "Output directory");
  app.add_option("--emit", emit, "Comma list of json,csv,svg,trace");
  app.add_option("--jobs", jobs, "Parallel runs (default: hardware threads)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (lower_path) {
      std::ifstream in(*lower_path);
      if (!in) throw nexus::Error(nexus::ErrorCode::kInvalidInput, "cannot open " + *lower_path);
      nlohmann::json j;
      try {
        in >> j;
      } catch (const nlohmann::json::exception& e) {
        throw nexus::Error(nexus::ErrorCode::kParse, e.what());
      }
      std::cout << nexus::to_json(nexus::lower_kernel(nexus::descriptor_from_json(j))).dump(2) << '\n';
      return kExitOk;
    }

    nlohmann::json doc;
    std::filesystem::path base = ".";
    if (spec_path) {
      std::ifstream in(*spec_path);
      if (!in) throw nexus::Error(nexus::ErrorCode::kInvalidInput, "cannot open spec " + *spec_path);
      try {
        in >> doc;
      } catch (const nlohmann::json::exception& e) {
        throw nexus::Error(nexus::ErrorCode::kParse, e.what());
      }
      base = std::filesystem::path(*spec_path).parent_path();
    } else {
      if (!o.workload) throw nexus::Error(nexus::ErrorCode::kInvalidInput, "need --spec or --workload");
      doc = {{"runs", nlohmann::json::array({nlohmann::json::object()})}};
    }
    if (!doc.contains("runs") || !doc.at("runs").is_array()) {
      throw nexus::Error(nexus::ErrorCode::kInvalidInput, "spec needs a 'runs' array");
    }
    for (auto& run : doc.at("runs")) apply_overrides(o, run);
    if (out_dir) doc["output_dir"] = *out_dir;
    if (emit) doc["emit"] = split_csv(*emit);
    if (jobs) doc["jobs"] = *jobs;

    const nexus::ExperimentSpec spec = nexus::spec_from_json(doc, base);
    const nexus::ExperimentResult result = nexus::run_experiment(spec);
    std::cout << nexus::summary_csv(result.summary);
    for (const auto& r : result.outcomes) {
      if (!r.ok) std::cerr << "run " << nexus::file_stem(r.spec) << " failed: " << r.error << '\n';
    }
    return result.exit_code == 0 ? kExitOk : kExitRunFailed;
  } catch (const nexus::Error& e) {
    std::cerr << "error [" << nexus::to_string(e.code()) << "]: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
}
