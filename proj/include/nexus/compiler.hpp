// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

// Kernel lowering: descriptor DAG -> ASAP order -> replicated config table, plus the
// runtime manager's static-AM generation.

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <json.hpp>

#include "nexus/am.hpp"
#include "nexus/error.hpp"
#include "nexus/placement.hpp"

namespace nexus {

// One instruction of the per-iteration body. The tags say how this step reads the
// message fields; `dest` names the tensor whose placement hosts the step.
struct InstructionTemplate {
  std::string name;
  Opcode opcode = Opcode::kNop;
  OperandTag res_c = OperandTag::kValue;
  OperandTag op1_c = OperandTag::kValue;
  OperandTag op2_c = OperandTag::kValue;
  std::string dest;

  bool same_instruction(const InstructionTemplate& o) const {
    return std::tie(opcode, res_c, op1_c, op2_c, dest) ==
           std::tie(o.opcode, o.res_c, o.op1_c, o.op2_c, o.dest);
  }
};

struct KernelDescriptor {
  std::string name;
  std::vector<InstructionTemplate> templates;
  std::vector<std::pair<std::size_t, std::size_t>> edges;  // (from, to)
};

struct ScheduledTemplate {
  std::size_t index = 0;  // position in the descriptor
  std::size_t level = 0;
};

// Longest-path levels; ties resolved by declaration order.
inline std::vector<ScheduledTemplate> asap_order(const KernelDescriptor& desc) {
  const std::size_t n = desc.templates.size();
  std::vector<std::vector<std::size_t>> preds(n);
  std::vector<std::size_t> indegree(n, 0);
  for (const auto& [from, to] : desc.edges) {
    if (from >= n || to >= n) throw Error(ErrorCode::kInvalidInput, "edge references unknown template");
    preds[to].push_back(from);
    ++indegree[to];
  }

  std::vector<std::size_t> level(n, 0);
  std::vector<bool> done(n, false);
  std::size_t finished = 0;
  // Kahn's algorithm, always taking the lowest-index ready node for determinism.
  while (finished < n) {
    std::size_t pick = n;
    for (std::size_t i = 0; i < n && pick == n; ++i) {
      if (!done[i] && indegree[i] == 0) pick = i;
    }
    if (pick == n) throw Error(ErrorCode::kCycleDetected, "dependency edges of '" + desc.name + "' form a cycle");
    done[pick] = true;
    ++finished;
    for (std::size_t p : preds[pick]) level[pick] = std::max(level[pick], level[p] + 1);
    for (const auto& [from, to] : desc.edges) {
      if (from == pick) --indegree[to];
    }
  }

  std::vector<ScheduledTemplate> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = {i, level[i]};
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.level < b.level; });
  return order;
}

// Drops duplicate templates (same instruction, same predecessors) and, when the kernel
// stores anything, templates from which no ACC is reachable.
inline KernelDescriptor remove_redundant(const KernelDescriptor& desc) {
  const std::size_t n = desc.templates.size();
  std::vector<std::size_t> alias(n);
  for (std::size_t i = 0; i < n; ++i) alias[i] = i;

  auto preds_of = [&](std::size_t t) {
    std::set<std::size_t> out;
    for (const auto& [from, to] : desc.edges) {
      if (to == t) out.insert(alias[from]);
    }
    return out;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (alias[j] == j && desc.templates[i].same_instruction(desc.templates[j]) &&
          preds_of(i) == preds_of(j)) {
        alias[i] = j;
        break;
      }
    }
  }

  std::vector<bool> live(n, true);
  const bool stores = std::any_of(desc.templates.begin(), desc.templates.end(),
                                  [](const auto& t) { return t.opcode == Opcode::kAcc; });
  if (stores) {
    std::vector<bool> reaches(n, false);
    for (std::size_t i = 0; i < n; ++i) reaches[i] = desc.templates[i].opcode == Opcode::kAcc;
    for (bool changed = true; changed;) {
      changed = false;
      for (const auto& [from, to] : desc.edges) {
        if (reaches[to] && !reaches[from]) reaches[from] = changed = true;
      }
    }
    live = reaches;
  }

  KernelDescriptor out;
  out.name = desc.name;
  std::vector<std::size_t> remap(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (alias[i] == i && live[i]) {
      remap[i] = out.templates.size();
      out.templates.push_back(desc.templates[i]);
    }
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& [from, to] : desc.edges) {
    const std::size_t f = remap[alias[from]];
    const std::size_t t = remap[alias[to]];
    if (f == n || t == n || f == t) continue;
    if (seen.insert({f, t}).second) out.edges.emplace_back(f, t);
  }
  return out;
}

struct ConfigTable {
  std::vector<ConfigEntry> entries;

  const ConfigEntry& at(std::size_t i) const {
    if (i >= entries.size()) throw Error(ErrorCode::kInvalidInput, "config index out of range");
    return entries[i];
  }
  std::size_t size() const { return entries.size(); }
};

// Entry k holds the k-th template in ASAP order; entries chain k -> k+1 and the last
// one ends the chain.
inline ConfigTable lower_kernel(const KernelDescriptor& desc) {
  const KernelDescriptor cleaned = remove_redundant(desc);
  if (cleaned.templates.empty()) {
    throw Error(ErrorCode::kEmptyDescriptor, "kernel '" + desc.name + "' has no live templates");
  }
  const auto order = asap_order(cleaned);
  if (order.size() > kConfigCapacity) {
    throw Error(ErrorCode::kCapacityExceeded, "kernel '" + desc.name + "' needs " +
                                                  std::to_string(order.size()) + " config entries");
  }
  ConfigTable table;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const auto& t = cleaned.templates[order[k].index];
    table.entries.push_back({t.opcode,
                             static_cast<std::uint8_t>(k + 1 == order.size() ? kChainEnd : k + 1),
                             t.res_c, t.op1_c, t.op2_c});
  }
  return table;
}

// Per-element inputs to static-AM generation, resolved from placements.
struct ChainSeed {
  PeId home = 0;         // PE whose AM queue holds the message
  Word op1 = 0;          // first-operand value (or per-kernel payload)
  Location operand;      // -> r1, op2
  Location result;       // -> r2, result
  std::optional<PeId> third;  // -> r3, defaults to the result PE
};

// Per-PE precompiled AM-queue contents.
struct StaticAmStream {
  std::vector<std::vector<ActiveMessage>> per_pe;

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& q : per_pe) n += q.size();
    return n;
  }
};

inline ActiveMessage make_static_am(const ChainSeed& s, const ConfigTable& table) {
  const ConfigEntry& head = table.at(0);
  ActiveMessage m;
  m.r1 = s.operand.pe;
  m.r2 = s.result.pe;
  m.r3 = s.third.value_or(s.result.pe);
  m.op1 = s.op1;
  m.op2 = s.operand.addr;
  m.result = s.result.addr;
  return apply_config(m, head);
}

inline StaticAmStream generate_static_ams(const std::vector<ChainSeed>& seeds,
                                          const ConfigTable& table, std::size_t pe_count) {
  StaticAmStream out;
  out.per_pe.resize(pe_count);
  for (const ChainSeed& s : seeds) {
    if (s.home >= pe_count) throw Error(ErrorCode::kInvalidInput, "seed home PE out of range");
    out.per_pe[s.home].push_back(make_static_am(s, table));
  }
  return out;
}

// --- descriptor documents -------------------------------------------------

inline OperandTag parse_tag(const std::string& s) {
  if (s == "VALUE") return OperandTag::kValue;
  if (s == "ADDRESS") return OperandTag::kAddress;
  throw Error(ErrorCode::kParse, "unknown operand tag '" + s + "'");
}

inline const char* tag_name(OperandTag t) { return t == OperandTag::kAddress ? "ADDRESS" : "VALUE"; }

inline KernelDescriptor descriptor_from_json(const nlohmann::json& j) {
  KernelDescriptor d;
  try {
    d.name = j.at("name").get<std::string>();
    for (const auto& t : j.at("templates")) {
      InstructionTemplate it;
      it.name = t.value("name", "");
      if (!parse_opcode(t.at("opcode").get<std::string>(), it.opcode)) {
        throw Error(ErrorCode::kParse, "unknown opcode " + t.at("opcode").dump());
      }
      it.res_c = parse_tag(t.value("res", "VALUE"));
      it.op1_c = parse_tag(t.value("op1", "VALUE"));
      it.op2_c = parse_tag(t.value("op2", "VALUE"));
      it.dest = t.value("dest", "");
      d.templates.push_back(std::move(it));
    }
    for (const auto& e : j.value("edges", nlohmann::json::array())) {
      d.edges.emplace_back(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kParse, e.what());
  }
  return d;
}

inline nlohmann::json to_json(const KernelDescriptor& d) {
  nlohmann::json t = nlohmann::json::array();
  for (const auto& it : d.templates) {
    t.push_back({{"name", it.name},
                 {"opcode", std::string(opcode_name(it.opcode))},
                 {"res", tag_name(it.res_c)},
                 {"op1", tag_name(it.op1_c)},
                 {"op2", tag_name(it.op2_c)},
                 {"dest", it.dest}});
  }
  nlohmann::json e = nlohmann::json::array();
  for (const auto& [f, to] : d.edges) e.push_back({f, to});
  return {{"name", d.name}, {"templates", t}, {"edges", e}};
}

inline nlohmann::json to_json(const ConfigTable& table) {
  nlohmann::json out = nlohmann::json::array();
  for (std::size_t i = 0; i < table.entries.size(); ++i) {
    const auto& e = table.entries[i];
    out.push_back({{"index", i},
                   {"opcode", std::string(opcode_name(e.opcode))},
                   {"n_pc", e.n_pc},
                   {"res", tag_name(e.res_c)},
                   {"op1", tag_name(e.op1_c)},
                   {"op2", tag_name(e.op2_c)},
                   {"word", encode_config(e)}});
  }
  return out;
}

inline nlohmann::json to_json(const StaticAmStream& s) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& q : s.per_pe) {
    nlohmann::json pe = nlohmann::json::array();
    for (const auto& m : q) pe.push_back(to_hex(encode_am(m)));
    out.push_back(pe);
  }
  return out;
}

// Binary dump: for each PE in order, the 9-byte wire form of every queued message.
inline void write_wire(std::ostream& os, const StaticAmStream& s) {
  for (const auto& q : s.per_pe) {
    for (const auto& m : q) {
      const AmBytes b = to_bytes(encode_am(m));
      os.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
    }
  }
}

}  // namespace nexus
