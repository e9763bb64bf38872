// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

// Cycle loop over all PEs and routers. One cycle runs five phases in fixed order:
//   1. PE units fire: stream continuation, refill, locally addressed static AMs
//   2. AM NIC emission into the router's LOCAL input (dynamic first, then static)
//   3. route computation + separable allocation; LOCAL deliveries and en-route
//      diversions execute on the spot
//   4. crossbar traversal to neighbor input buffers
//   5. on/off flag update (visible upstream next cycle) and statistics

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "nexus/am.hpp"
#include "nexus/compiler.hpp"
#include "nexus/error.hpp"
#include "nexus/partition.hpp"
#include "nexus/pe.hpp"
#include "nexus/router.hpp"

namespace nexus {

inline constexpr double kUnlimitedBandwidth = std::numeric_limits<double>::infinity();

struct SimConfig {
  Mesh mesh{4, 4};
  Mode mode = Mode::kNexus;
  std::uint64_t seed = 1;
  std::uint64_t cycle_ceiling = 10'000'000;
  std::size_t memory_words = kDataMemoryWords;
  std::size_t am_queue_capacity = kAmQueueEntries;
  double bandwidth = kUnlimitedBandwidth;  // bytes per cycle
  std::optional<std::size_t> tile_rows;

  void validate() const {
    if (mesh.width < 1 || mesh.height < 1) throw Error(ErrorCode::kInvalidInput, "mesh dims must be positive");
    if (mesh.size() > 16) throw Error(ErrorCode::kInvalidInput, "4-bit destinations address at most 16 PEs");
    if (cycle_ceiling < 1) throw Error(ErrorCode::kInvalidInput, "cycle ceiling must be >= 1");
    if (memory_words < 1 || memory_words > 65536) throw Error(ErrorCode::kInvalidInput, "bad memory size");
    if (am_queue_capacity < 1) throw Error(ErrorCode::kInvalidInput, "AM queue capacity must be >= 1");
    if (!(bandwidth > 0)) throw Error(ErrorCode::kInvalidInput, "bandwidth must be positive");
  }
};

struct TileStats {
  std::uint64_t load_cycles = 0;
  std::uint64_t exec_cycles = 0;
};

struct SimStats {
  std::uint64_t cycles = 0;
  bool completed = true;
  std::vector<std::uint64_t> busy;                  // per PE
  std::vector<std::array<std::uint64_t, kPorts>> stalls;  // per PE, per input port
  std::uint64_t alu_executions = 0;
  std::uint64_t innetwork_executions = 0;
  std::uint64_t flit_hops = 0;
  std::uint64_t injected_flits = 0;
  std::uint64_t delivered_flits = 0;
  std::uint64_t diverted_flits = 0;
  std::uint64_t chains_injected = 0;
  std::uint64_t chains_retired = 0;
  std::uint64_t illegal_turns = 0;
  std::uint64_t buffer_overflows = 0;
  std::uint64_t max_outbox = 0;
  std::vector<TileStats> tiles;

  explicit SimStats(std::size_t pes = 0) : busy(pes, 0), stalls(pes, std::array<std::uint64_t, kPorts>{}) {}

  double utilization() const {
    if (cycles == 0 || busy.empty()) return 0.0;
    std::uint64_t total = 0;
    for (auto b : busy) total += b;
    return static_cast<double>(total) / (static_cast<double>(cycles) * static_cast<double>(busy.size()));
  }

  double innetwork_fraction() const {
    return alu_executions == 0 ? 0.0
                               : static_cast<double>(innetwork_executions) / static_cast<double>(alu_executions);
  }

  std::uint64_t traffic_bits() const { return flit_hops * AmWord::kWidth; }

  std::array<std::uint64_t, kPorts> congestion_by_port() const {
    std::array<std::uint64_t, kPorts> out{};
    for (const auto& pe : stalls) {
      for (std::size_t p = 0; p < kPorts; ++p) out[p] += pe[p];
    }
    return out;
  }

  std::uint64_t total_stalls() const {
    std::uint64_t t = 0;
    for (auto c : congestion_by_port()) t += c;
    return t;
  }

  // Sequential composition of two runs on the same fabric.
  void accumulate(const SimStats& o) {
    cycles += o.cycles;
    completed = completed && o.completed;
    for (std::size_t i = 0; i < busy.size() && i < o.busy.size(); ++i) {
      busy[i] += o.busy[i];
      for (std::size_t p = 0; p < kPorts; ++p) stalls[i][p] += o.stalls[i][p];
    }
    alu_executions += o.alu_executions;
    innetwork_executions += o.innetwork_executions;
    flit_hops += o.flit_hops;
    injected_flits += o.injected_flits;
    delivered_flits += o.delivered_flits;
    diverted_flits += o.diverted_flits;
    chains_injected += o.chains_injected;
    chains_retired += o.chains_retired;
    illegal_turns += o.illegal_turns;
    buffer_overflows += o.buffer_overflows;
    max_outbox = std::max(max_outbox, o.max_outbox);
    tiles.insert(tiles.end(), o.tiles.begin(), o.tiles.end());
  }
};

// Everything the runtime manager preloads for one tile (or one synchronized phase).
struct TileProgram {
  ConfigTable config;
  StaticAmStream stream;
  std::vector<std::vector<Word>> memory;  // per PE image, zero-padded
  std::vector<std::map<Word, std::vector<BitVectorBlock>>> metadata;  // per PE
  bool reuse_memory = false;  // keep data memories from the previous phase

  std::size_t data_bytes() const {
    if (reuse_memory) return 0;
    std::size_t words = 0;
    for (const auto& m : memory) words += m.size();
    return words * sizeof(Word);
  }
};

struct TraceEvent {
  std::uint64_t cycle = 0;
  PeId pe = 0;
  std::string_view kind;  // issue, inject, exec, divert, deliver, traverse, stall, retire
  Port port = Port::kLocal;
  ActiveMessage msg;
};

using TraceSink = std::function<void(const TraceEvent&)>;

inline std::string format_trace(const TraceEvent& e) {
  return std::to_string(e.cycle) + " " + std::to_string(e.pe) + " " + std::string(e.kind) + " " +
         std::string(port_name(e.port)) + " " + std::string(opcode_name(e.msg.opcode)) + " " +
         to_hex(encode_am(e.msg));
}

inline std::uint64_t loading_cycles(std::size_t bytes, double bandwidth) {
  if (std::isinf(bandwidth) || bytes == 0) return 0;
  return static_cast<std::uint64_t>(std::ceil(static_cast<double>(bytes) / bandwidth));
}

class Machine {
 public:
  explicit Machine(SimConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed), stats_(cfg_.mesh.size()) {
    cfg_.validate();
    const std::size_t n = cfg_.mesh.size();
    pes_.resize(n);
    routers_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      pes_[i].id = static_cast<PeId>(i);
      pes_[i].data_memory.assign(cfg_.memory_words, 0);
      pes_[i].am_queue_capacity = cfg_.am_queue_capacity;
    }
  }

  const SimConfig& config() const { return cfg_; }
  const Mesh& mesh() const { return cfg_.mesh; }
  std::size_t size() const { return pes_.size(); }
  PeState& pe(std::size_t i) { return pes_.at(i); }
  const PeState& pe(std::size_t i) const { return pes_.at(i); }
  RouterState& router(std::size_t i) { return routers_.at(i); }
  const RouterState& router(std::size_t i) const { return routers_.at(i); }
  std::uint64_t cycle() const { return cycle_; }
  const SimStats& stats() const { return stats_; }

  void set_trace(TraceSink sink) { trace_ = std::move(sink); }

  // Installs config memories, AM queues, data memories and scanner metadata.
  void load(const TileProgram& prog) {
    if (prog.stream.per_pe.size() > pes_.size()) throw Error(ErrorCode::kInvalidInput, "stream wider than mesh");
    for (std::size_t i = 0; i < pes_.size(); ++i) {
      PeState& pe = pes_[i];
      pe.config = prog.config;
      pe.am_queue.clear();
      pe.offchip.clear();
      pe.outbox.clear();
      pe.stream.reset();
      if (i < prog.stream.per_pe.size()) {
        for (const auto& m : prog.stream.per_pe[i]) pe.offchip.push_back(m);
      }
      if (!prog.reuse_memory) {
        std::fill(pe.data_memory.begin(), pe.data_memory.end(), 0);
        if (i < prog.memory.size()) {
          if (prog.memory[i].size() > pe.data_memory.size()) {
            throw Error(ErrorCode::kTileTooLarge, "memory image exceeds PE " + std::to_string(i));
          }
          std::copy(prog.memory[i].begin(), prog.memory[i].end(), pe.data_memory.begin());
        }
      }
      pe.stream_metadata = i < prog.metadata.size() ? prog.metadata[i]
                                                    : std::map<Word, std::vector<BitVectorBlock>>{};
      // Preload fills the queue; the remainder streams in during execution.
      refill(pe, /*initial=*/true);
    }
  }

  bool idle() const {
    for (const auto& pe : pes_) {
      if (!pe.idle()) return false;
    }
    for (const auto& r : routers_) {
      if (!r.empty()) return false;
    }
    return true;
  }

  void step() {
    for (auto& pe : pes_) {
      pe.begin_cycle();
      refill(pe, false);
    }
    for (auto& pe : pes_) fire_units(pe);
    for (std::size_t i = 0; i < pes_.size(); ++i) emit(i);

    std::vector<Move> moves;
    for (std::size_t i = 0; i < routers_.size(); ++i) route_and_allocate(i, moves);
    for (const Move& mv : moves) traverse(mv);

    for (std::size_t i = 0; i < routers_.size(); ++i) {
      for (Port p : {Port::kNorth, Port::kEast, Port::kSouth, Port::kWest}) {
        if (auto up = cfg_.mesh.neighbor(static_cast<PeId>(i), p)) {
          routers_[*up].out_on[index(opposite(p))] = on_off_update(routers_[i].occupancy(p));
        }
      }
      if (pes_[i].alu_busy || pes_[i].decode_busy) ++stats_.busy[i];
    }
    ++cycle_;
    ++stats_.cycles;
  }

  // Steps until the global idle condition or the cycle ceiling. Statistics cover this
  // run only; the cycle counter restarts at 0.
  SimStats run_until_idle() {
    stats_ = SimStats(pes_.size());
    cycle_ = 0;
    while (!idle()) {
      if (cycle_ >= cfg_.cycle_ceiling) {
        stats_.completed = false;
        break;
      }
      step();
    }
    stats_.tiles.push_back({0, stats_.cycles});
    return stats_;
  }

 private:
  struct Move {
    std::size_t router;
    Port input;
    Port output;
  };

  void trace(PeId pe, std::string_view kind, Port port, const ActiveMessage& m) {
    if (trace_) trace_(TraceEvent{cycle_, pe, kind, port, m});
  }

  void refill(PeState& pe, bool initial) {
    if (pe.offchip.empty()) return;
    if (initial || std::isinf(cfg_.bandwidth)) {
      while (!pe.offchip.empty() && pe.am_queue.size() < pe.am_queue_capacity) {
        pe.am_queue.push_back(pe.offchip.front());
        pe.offchip.pop_front();
      }
      return;
    }
    // Each PE refills at the configured byte rate; partial entries carry over.
    refill_credit_bits_[pe.id] += cfg_.bandwidth * 8.0;
    while (!pe.offchip.empty() && pe.am_queue.size() < pe.am_queue_capacity &&
           refill_credit_bits_[pe.id] >= AmWord::kWidth) {
      refill_credit_bits_[pe.id] -= AmWord::kWidth;
      pe.am_queue.push_back(pe.offchip.front());
      pe.offchip.pop_front();
    }
    if (pe.am_queue.size() >= pe.am_queue_capacity) refill_credit_bits_[pe.id] = 0;
  }

  void finish(PeState& pe, const ActiveMessage& out) {
    if (out.n_pc == kChainEnd) {
      ++stats_.chains_retired;
      trace(pe.id, "retire", Port::kLocal, out);
    } else {
      pe.outbox.push_back(out);
      stats_.max_outbox = std::max<std::uint64_t>(stats_.max_outbox, pe.outbox.size());
    }
  }

  // Runs a message on the unit the Input NIC selects for it.
  void execute(PeState& pe, const ActiveMessage& msg) {
    switch (input_nic_accept(msg)) {
      case Dispatch::kCompute:
        ++stats_.alu_executions;
        trace(pe.id, "exec", Port::kLocal, msg);
        finish(pe, compute_execute(pe, msg));
        break;
      case Dispatch::kDecode:
        trace(pe.id, "exec", Port::kLocal, msg);
        if (msg.opcode == Opcode::kStream) {
          decode_stream_begin(pe, msg);
          // Each streamed element continues as a chain of its own.
          stats_.chains_injected += pe.stream->coords.size() - 1;
          finish(pe, decode_stream_next(pe));
        } else {
          finish(pe, decode_dereference(pe, msg));
        }
        break;
      case Dispatch::kRetire:
        ++stats_.chains_retired;
        trace(pe.id, "retire", Port::kLocal, msg);
        break;
      case Dispatch::kPassThrough:
        finish(pe, rotate_destinations(msg));
        break;
    }
  }

  void fire_units(PeState& pe) {
    if (pe.stream) finish(pe, decode_stream_next(pe));
    // Static AMs addressed to their own PE go straight to the local units.
    if (!pe.am_queue.empty()) {
      const ActiveMessage& head = pe.am_queue.front();
      if (head.r1 == pe.id && !is_alu_class(head.opcode) && pe.outbox_has_space() && can_accept(pe, head)) {
        const ActiveMessage m = head;
        pe.am_queue.pop_front();
        pe.static_taken = true;
        ++stats_.chains_injected;
        trace(pe.id, "issue", Port::kLocal, m);
        execute(pe, m);
      }
    }
  }

  void emit(std::size_t i) {
    PeState& pe = pes_[i];
    auto& local = routers_[i].input[index(Port::kLocal)];
    if (!pe.outbox.empty()) {
      if (!can_inject_dynamic(local.size())) return;
      const ActiveMessage m = morph(pe, pe.outbox.front());
      pe.outbox.pop_front();
      push_injection(i, Flit{m, std::nullopt, std::nullopt, next_flit_id_++});
      return;
    }
    if (pe.static_taken || pe.am_queue.empty()) return;
    const ActiveMessage& head = pe.am_queue.front();
    if (head.r1 == pe.id || !can_inject(local.size())) return;
    Flit f{head, std::nullopt, std::nullopt, next_flit_id_++};
    pe.am_queue.pop_front();
    pe.static_taken = true;
    ++stats_.chains_injected;
    if (cfg_.mode == Mode::kTiaValiant) f.waypoint = valiant_waypoint(pe.id, f.am.r1);
    push_injection(i, std::move(f));
  }

  void push_injection(std::size_t i, Flit f) {
    auto& local = routers_[i].input[index(Port::kLocal)];
    if (local.size() >= kBufferSlots) ++stats_.buffer_overflows;
    ++stats_.injected_flits;
    trace(static_cast<PeId>(i), "inject", Port::kLocal, f.am);
    local.push_back(std::move(f));
  }

  // Random intermediate inside the minimal quadrant; when the destination lies west,
  // the intermediate shares its column so both legs stay West-First.
  std::optional<PeId> valiant_waypoint(PeId src, PeId dst) {
    const Coord s = cfg_.mesh.coord(src);
    const Coord d = cfg_.mesh.coord(dst);
    const int x_lo = d.x < s.x ? d.x : s.x;
    const int x_hi = d.x;
    std::uniform_int_distribution<int> dx(x_lo, x_hi);
    std::uniform_int_distribution<int> dy(std::min(s.y, d.y), std::max(s.y, d.y));
    const int wx = dx(rng_);
    const int wy = dy(rng_);
    const PeId w = cfg_.mesh.id({wx, wy});
    if (w == src || w == dst) return std::nullopt;
    return w;
  }

  void route_and_allocate(std::size_t i, std::vector<Move>& moves) {
    RouterState& r = routers_[i];
    PeState& pe = pes_[i];
    const Coord here = cfg_.mesh.coord(static_cast<PeId>(i));

    Requests requests{};
    for (std::size_t in = 0; in < kPorts; ++in) {
      auto& q = r.input[in];
      if (q.empty()) continue;
      Flit& f = q.front();
      if (f.waypoint && *f.waypoint == i) f.waypoint.reset();
      const PeId target = f.waypoint.value_or(f.am.r1);
      requests[in] = select_output(route_compute(here, cfg_.mesh.coord(target)), r.out_on);
    }

    std::array<bool, kPorts> available{};
    for (Port p : {Port::kNorth, Port::kEast, Port::kSouth, Port::kWest}) {
      available[index(p)] = r.out_on[index(p)] && cfg_.mesh.neighbor(static_cast<PeId>(i), p).has_value();
    }
    for (std::size_t in = 0; in < kPorts; ++in) {
      if (requests[in] == Port::kLocal) {
        available[index(Port::kLocal)] = can_accept(pe, r.input[in].front().am);
        break;
      }
    }

    const Grants grants = allocate(requests, available);

    // LOCAL delivery first so it has first claim on the units.
    for (std::size_t in = 0; in < kPorts; ++in) {
      if (grants[in] != Port::kLocal) continue;
      Flit f = std::move(r.input[in].front());
      r.input[in].pop_front();
      ++stats_.delivered_flits;
      trace(pe.id, "deliver", static_cast<Port>(in), f.am);
      execute(pe, f.am);
    }
    for (std::size_t in = 0; in < kPorts; ++in) {
      if (!requests[in]) continue;
      const auto& g = grants[in];
      if (!g) {
        ++r.stalls[in];
        ++stats_.stalls[i][in];
        trace(pe.id, "stall", static_cast<Port>(in), r.input[in].front().am);
        continue;
      }
      if (*g == Port::kLocal) continue;
      const ActiveMessage& m = r.input[in].front().am;
      if (enroute_hook(cfg_.mode, m, static_cast<Port>(in), !pe.alu_busy, pe.outbox_has_space())) {
        const ActiveMessage msg = m;
        r.input[in].pop_front();
        ++stats_.diverted_flits;
        ++stats_.alu_executions;
        ++stats_.innetwork_executions;
        trace(pe.id, "divert", static_cast<Port>(in), msg);
        finish(pe, compute_execute(pe, msg));
        continue;
      }
      moves.push_back({i, static_cast<Port>(in), *g});
    }
  }

  void traverse(const Move& mv) {
    RouterState& from = routers_[mv.router];
    Flit f = std::move(from.input[index(mv.input)].front());
    from.input[index(mv.input)].pop_front();
    if (!legal_turn(f.heading, mv.output)) ++stats_.illegal_turns;
    f.heading = mv.output;
    const PeId to = *cfg_.mesh.neighbor(static_cast<PeId>(mv.router), mv.output);
    auto& dst = routers_[to].input[index(opposite(mv.output))];
    if (dst.size() >= kBufferSlots) ++stats_.buffer_overflows;
    ++stats_.flit_hops;
    trace(static_cast<PeId>(mv.router), "traverse", mv.output, f.am);
    dst.push_back(std::move(f));
  }

  SimConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<PeState> pes_;
  std::vector<RouterState> routers_;
  std::map<PeId, double> refill_credit_bits_;
  SimStats stats_;
  TraceSink trace_;
  std::uint64_t cycle_ = 0;
  std::uint64_t next_flit_id_ = 0;
};

// Runs tiles (or synchronized phases) back to back. Before each tile the data
// memories are loaded at the configured bandwidth; AM-queue refill overlaps execution.
// `after_tile` observes the machine once each tile has drained.
inline SimStats run_tiled(Machine& machine, const std::vector<TileProgram>& tiles,
                          const std::function<void(std::size_t, const Machine&)>& after_tile = {}) {
  SimStats total(machine.size());
  for (std::size_t k = 0; k < tiles.size(); ++k) {
    const TileProgram& t = tiles[k];
    machine.load(t);
    const std::uint64_t load = loading_cycles(t.data_bytes(), machine.config().bandwidth);
    SimStats s = machine.run_until_idle();
    s.tiles.back().load_cycles = load;
    s.cycles += load;
    total.accumulate(s);
    if (!s.completed) break;
    if (after_tile) after_tile(k, machine);
  }
  return total;
}

}  // namespace nexus
