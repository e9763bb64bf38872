// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

// Mesh router: West-First route computation, fixed-priority separable allocation,
// on/off backpressure with three-slot input buffers, and bubble injection.

#pragma once

#include <array>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <optional>
#include <string_view>
#include <vector>

#include "nexus/am.hpp"

namespace nexus {

// Index order doubles as allocation priority: LOCAL > NORTH > EAST > SOUTH > WEST.
enum class Port : std::uint8_t { kLocal = 0, kNorth = 1, kEast = 2, kSouth = 3, kWest = 4 };
inline constexpr std::size_t kPorts = 5;
inline constexpr std::size_t kBufferSlots = 3;
inline constexpr std::size_t kOffThreshold = 1;  // OFF once free slots <= 1
inline constexpr std::size_t kOnThreshold = 2;   // ON once free slots >= 2

constexpr std::size_t index(Port p) { return static_cast<std::size_t>(p); }

constexpr std::string_view port_name(Port p) {
  constexpr std::array<std::string_view, kPorts> kNames = {"LOCAL", "NORTH", "EAST", "SOUTH", "WEST"};
  return kNames[index(p)];
}

constexpr Port opposite(Port p) {
  switch (p) {
    case Port::kNorth: return Port::kSouth;
    case Port::kSouth: return Port::kNorth;
    case Port::kEast: return Port::kWest;
    case Port::kWest: return Port::kEast;
    default: return Port::kLocal;
  }
}

struct Coord {
  int x = 0;
  int y = 0;
  friend bool operator==(const Coord&, const Coord&) = default;
};

// PE id = y * width + x; NORTH is y - 1.
struct Mesh {
  int width = 4;
  int height = 4;

  std::size_t size() const { return static_cast<std::size_t>(width * height); }
  Coord coord(PeId id) const { return {id % width, id / width}; }
  PeId id(Coord c) const { return static_cast<PeId>(c.y * width + c.x); }

  std::optional<PeId> neighbor(PeId id, Port p) const {
    Coord c = coord(id);
    switch (p) {
      case Port::kNorth: --c.y; break;
      case Port::kSouth: ++c.y; break;
      case Port::kEast: ++c.x; break;
      case Port::kWest: --c.x; break;
      default: return id;
    }
    if (c.x < 0 || c.y < 0 || c.x >= width || c.y >= height) return std::nullopt;
    return this->id(c);
  }

  int distance(PeId a, PeId b) const {
    const Coord ca = coord(a), cb = coord(b);
    return std::abs(ca.x - cb.x) + std::abs(ca.y - cb.y);
  }
};

// A message in the network plus simulator-side routing metadata.
struct Flit {
  ActiveMessage am;
  std::optional<PeId> waypoint;       // Valiant intermediate, cleared on arrival
  std::optional<Port> heading;        // direction of the last hop taken
  std::uint64_t id = 0;
};

// West-First: any westward distance must be covered first and only westward;
// otherwise the productive subset of {NORTH, SOUTH, EAST}. At the destination, LOCAL.
inline std::vector<Port> route_compute(Coord current, Coord dest) {
  if (dest.x < current.x) return {Port::kWest};
  std::vector<Port> out;
  if (dest.x > current.x) out.push_back(Port::kEast);
  if (dest.y < current.y) out.push_back(Port::kNorth);
  if (dest.y > current.y) out.push_back(Port::kSouth);
  if (out.empty()) out.push_back(Port::kLocal);
  return out;
}

// Adaptive pick among candidates: prefer outputs whose downstream flag is ON, then
// EAST > NORTH > SOUTH (candidate lists are already in that order).
inline Port select_output(const std::vector<Port>& candidates, const std::array<bool, kPorts>& out_on) {
  for (Port p : candidates) {
    if (p == Port::kLocal || out_on[index(p)]) return p;
  }
  return candidates.front();
}

using Requests = std::array<std::optional<Port>, kPorts>;  // per input
using Grants = std::array<std::optional<Port>, kPorts>;    // per input

// Two-stage separable allocation. Stage 1: each output grants its highest-priority
// requester, unless the output is unavailable (downstream OFF / PE cannot accept).
// Stage 2: each input keeps at most one grant (single-request inputs make it trivial).
inline Grants allocate(const Requests& requests, const std::array<bool, kPorts>& output_available) {
  Grants grants{};
  std::array<bool, kPorts> input_granted{};
  for (std::size_t out = 0; out < kPorts; ++out) {
    if (!output_available[out]) continue;
    for (std::size_t in = 0; in < kPorts; ++in) {
      if (requests[in] && index(*requests[in]) == out) {
        if (!input_granted[in]) {
          grants[in] = static_cast<Port>(out);
          input_granted[in] = true;
        }
        break;
      }
    }
  }
  return grants;
}

// true = ON. The flag is sampled by the upstream router on the following cycle.
constexpr bool on_off_update(std::size_t occupancy) {
  const std::size_t free = kBufferSlots - occupancy;
  return free >= kOnThreshold;
}

// Bubble rule for new traffic: leave at least one slot free behind the injection.
constexpr bool can_inject(std::size_t local_occupancy) {
  return kBufferSlots - local_occupancy >= 2;
}

// Continuations of chains already in flight need only a free slot.
constexpr bool can_inject_dynamic(std::size_t local_occupancy) {
  return local_occupancy < kBufferSlots;
}

enum class Mode { kNexus, kTia, kTiaValiant };

constexpr std::string_view mode_name(Mode m) {
  switch (m) {
    case Mode::kNexus: return "nexus";
    case Mode::kTia: return "tia";
    case Mode::kTiaValiant: return "tia_valiant";
  }
  return "?";
}

inline bool parse_mode(std::string_view s, Mode& out) {
  for (Mode m : {Mode::kNexus, Mode::kTia, Mode::kTiaValiant}) {
    if (mode_name(m) == s) {
      out = m;
      return true;
    }
  }
  return false;
}

// En-route execution eligibility for a message granted a non-LOCAL output at a router
// it entered from a neighbor.
inline bool enroute_hook(Mode mode, const ActiveMessage& msg, Port input, bool alu_idle,
                         bool outbox_space) {
  if (mode != Mode::kNexus || input == Port::kLocal) return false;
  return is_alu_class(msg.opcode) && msg.op1_c == OperandTag::kValue &&
         msg.op2_c == OperandTag::kValue && alu_idle && outbox_space;
}

struct RouterState {
  std::array<std::deque<Flit>, kPorts> input;
  std::array<bool, kPorts> out_on{true, true, true, true, true};  // from downstream, per output
  std::array<std::uint64_t, kPorts> stalls{};

  std::size_t occupancy(Port p) const { return input[index(p)].size(); }
  bool empty() const {
    for (const auto& q : input) {
      if (!q.empty()) return false;
    }
    return true;
  }
};

// West-First forbids any turn into WEST after a non-west hop.
constexpr bool legal_turn(std::optional<Port> heading, Port next) {
  return !(next == Port::kWest && heading && *heading != Port::kWest);
}

}  // namespace nexus
