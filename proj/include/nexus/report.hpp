// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

// Serialized forms of SimStats. Every figure-style output is a pure function of the
// stats document, so plots can be regenerated from the JSON alone.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>

#include <json.hpp>

#include "nexus/engine.hpp"
#include "nexus/router.hpp"

namespace nexus {

inline constexpr const char* kStatsSchema = "nexus.stats/1";

inline nlohmann::json congestion_json(const std::array<std::uint64_t, kPorts>& c) {
  nlohmann::json j = nlohmann::json::object();
  for (std::size_t p = 0; p < kPorts; ++p) j[std::string(port_name(static_cast<Port>(p)))] = c[p];
  return j;
}

// `run` carries the reproducibility record (workload, dims, density, seed, ...).
inline nlohmann::json stats_to_json(const SimStats& s, const Mesh& mesh, const nlohmann::json& run) {
  nlohmann::json per_pe = nlohmann::json::array();
  for (std::size_t i = 0; i < s.busy.size(); ++i) {
    const Coord c = mesh.coord(static_cast<PeId>(i));
    per_pe.push_back({{"pe", i},
                      {"x", c.x},
                      {"y", c.y},
                      {"busy_cycles", s.busy[i]},
                      {"utilization", s.cycles ? static_cast<double>(s.busy[i]) / static_cast<double>(s.cycles) : 0.0},
                      {"stalls", congestion_json(s.stalls[i])}});
  }
  nlohmann::json tiles = nlohmann::json::array();
  for (const auto& t : s.tiles) tiles.push_back({{"load_cycles", t.load_cycles}, {"exec_cycles", t.exec_cycles}});
  return {{"schema", kStatsSchema},
          {"run", run},
          {"status", s.completed ? "completed" : "timeout"},
          {"cycles", s.cycles},
          {"utilization", s.utilization()},
          {"alu_executions", s.alu_executions},
          {"innetwork_executions", s.innetwork_executions},
          {"innetwork_fraction", s.innetwork_fraction()},
          {"flit_hops", s.flit_hops},
          {"traffic_bits", s.traffic_bits()},
          {"flits", {{"injected", s.injected_flits}, {"delivered", s.delivered_flits}, {"diverted", s.diverted_flits}}},
          {"chains", {{"injected", s.chains_injected}, {"retired", s.chains_retired}}},
          {"congestion", congestion_json(s.congestion_by_port())},
          {"total_stalls", s.total_stalls()},
          {"illegal_turns", s.illegal_turns},
          {"buffer_overflows", s.buffer_overflows},
          {"max_outbox_depth", s.max_outbox},
          {"tiles", tiles},
          {"per_pe", per_pe}};
}

// Per-PE busy counts, read back from a stats document.
inline std::string busy_csv(const nlohmann::json& stats) {
  std::ostringstream os;
  os << "pe,x,y,busy_cycles,utilization\n";
  for (const auto& p : stats.at("per_pe")) {
    char util[32];
    std::snprintf(util, sizeof util, "%.6f", p.at("utilization").get<double>());
    os << p.at("pe").get<std::size_t>() << ',' << p.at("x").get<int>() << ',' << p.at("y").get<int>() << ','
       << p.at("busy_cycles").get<std::uint64_t>() << ',' << util << '\n';
  }
  return os.str();
}

// White at 0% through to deep red at 100%; the scale is fixed, not data-relative.
inline std::string heat_color(double u) {
  u = std::clamp(u, 0.0, 1.0);
  const int r = static_cast<int>(std::lround(255 - 75 * u));
  const int gb = static_cast<int>(std::lround(255 * (1.0 - u)));
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, gb, gb);
  return buf;
}

inline std::string heatmap_svg(const nlohmann::json& stats) {
  int width = 0, height = 0;
  for (const auto& p : stats.at("per_pe")) {
    width = std::max(width, p.at("x").get<int>() + 1);
    height = std::max(height, p.at("y").get<int>() + 1);
  }
  constexpr int kCell = 64;
  constexpr int kLegend = 28;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width * kCell << "\" height=\""
     << height * kCell + kLegend << "\" font-family=\"sans-serif\" font-size=\"13\">\n";
  for (const auto& p : stats.at("per_pe")) {
    const int x = p.at("x").get<int>() * kCell;
    const int y = p.at("y").get<int>() * kCell;
    const double u = p.at("utilization").get<double>();
    char label[16];
    std::snprintf(label, sizeof label, "%.1f%%", 100.0 * u);
    os << "  <rect x=\"" << x << "\" y=\"" << y << "\" width=\"" << kCell << "\" height=\"" << kCell
       << "\" fill=\"" << heat_color(u) << "\" stroke=\"#444\"/>\n";
    os << "  <text x=\"" << x + kCell / 2 << "\" y=\"" << y + kCell / 2 + 5 << "\" text-anchor=\"middle\">" << label
       << "</text>\n";
  }
  const int ly = height * kCell + 8;
  os << "  <text x=\"2\" y=\"" << ly + 12 << "\">0%</text>\n";
  for (int i = 0; i < 10; ++i) {
    os << "  <rect x=\"" << 30 + i * 12 << "\" y=\"" << ly << "\" width=\"12\" height=\"14\" fill=\""
       << heat_color((i + 0.5) / 10.0) << "\"/>\n";
  }
  os << "  <text x=\"" << 154 << "\" y=\"" << ly + 12 << "\">100%</text>\n";
  os << "</svg>\n";
  return os.str();
}

}  // namespace nexus
