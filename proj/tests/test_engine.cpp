// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "nexus/engine.hpp"
#include "nexus/workloads.hpp"

using namespace nexus;

namespace {

struct Event {
  std::uint64_t cycle;
  PeId pe;
  std::string kind;
  Opcode op;
};

// Two-PE SpMV example: f (matrix element) and h (vector element) meet at PE0, the
// product is accumulated into n on PE1.
constexpr Word kF = 3, kH = 5, kN = 7;

TileProgram two_pe_program() {
  TileProgram p;
  p.config = lower_kernel(spmv_descriptor());
  ChainSeed seed{0, kF, {0, 0}, {1, 0}, std::nullopt};
  p.stream = generate_static_ams({seed}, p.config, 2);
  p.memory = {{kH}, {kN}};
  return p;
}

ActiveMessage single_hop_message(PeId from, PeId to) {
  (void)from;
  ActiveMessage m;
  m.opcode = Opcode::kLoad;
  m.n_pc = kChainEnd;
  m.r1 = to;
  m.r2 = to;
  m.r3 = to;
  m.op1_c = OperandTag::kValue;
  m.op2_c = OperandTag::kAddress;
  return m;
}

TileProgram one_message(std::size_t pes, PeId src, PeId dst) {
  TileProgram p;
  p.stream.per_pe.resize(pes);
  p.stream.per_pe[src].push_back(single_hop_message(src, dst));
  return p;
}

}  // namespace

TEST(TwoPeSpmv, GoldenTrace) {
  SimConfig cfg;
  cfg.mesh = {2, 1};
  Machine m(cfg);
  std::vector<Event> events;
  m.set_trace([&](const TraceEvent& e) {
    if (e.kind == "exec" || e.kind == "retire") events.push_back({e.cycle, e.pe, std::string(e.kind), e.msg.opcode});
  });
  m.load(two_pe_program());
  const SimStats s = m.run_until_idle();

  ASSERT_EQ(events.size(), 4u);
  EXPECT_EQ(events[0].cycle, 0u);
  EXPECT_EQ(events[0].pe, 0u);
  EXPECT_EQ(events[0].op, Opcode::kLoad);
  EXPECT_EQ(events[1].cycle, 1u);
  EXPECT_EQ(events[1].pe, 1u);
  EXPECT_EQ(events[1].op, Opcode::kMul);
  EXPECT_EQ(events[2].cycle, 2u);
  EXPECT_EQ(events[2].pe, 1u);
  EXPECT_EQ(events[2].op, Opcode::kAcc);
  EXPECT_EQ(events[3].kind, "retire");

  EXPECT_TRUE(s.completed);
  EXPECT_EQ(s.cycles, 3u);
  EXPECT_EQ(s.chains_injected, 1u);
  EXPECT_EQ(s.chains_retired, 1u);
  EXPECT_EQ(s.flit_hops, 1u);
  EXPECT_EQ(m.pe(1).data_memory[0], kN + kF * kH);
  EXPECT_EQ(m.pe(0).data_memory[0], kH);
}

TEST(TwoPeSpmv, StaticMessageFields) {
  const TileProgram p = two_pe_program();
  const ActiveMessage& am = p.stream.per_pe[0].at(0);
  EXPECT_EQ(am.opcode, Opcode::kLoad);
  EXPECT_EQ(am.r1, 0u);
  EXPECT_EQ(am.r2, 1u);
  EXPECT_EQ(am.op1, kF);
  EXPECT_EQ(am.n_pc, 1u);
}

TEST(TwoPeSpmv, TraceLineFormat) {
  TraceEvent e;
  e.cycle = 4;
  e.pe = 2;
  e.kind = "deliver";
  e.port = Port::kWest;
  e.msg.opcode = Opcode::kMul;
  const std::string line = format_trace(e);
  EXPECT_EQ(line, "4 2 deliver WEST MUL " + to_hex(encode_am(e.msg)));
}

TEST(Machine, EmptyProgramFinishesImmediately) {
  Machine m(SimConfig{});
  m.load(TileProgram{});
  const SimStats s = m.run_until_idle();
  EXPECT_TRUE(s.completed);
  EXPECT_EQ(s.cycles, 0u);
  EXPECT_EQ(s.utilization(), 0.0);
}

TEST(Machine, LatencyFloorAllPairs) {
  for (Mesh mesh : {Mesh{2, 2}, Mesh{3, 2}, Mesh{3, 3}, Mesh{4, 4}}) {
    for (PeId s = 0; s < mesh.size(); ++s) {
      for (PeId d = 0; d < mesh.size(); ++d) {
        for (Mode mode : {Mode::kNexus, Mode::kTia, Mode::kTiaValiant}) {
          SimConfig cfg;
          cfg.mesh = mesh;
          cfg.mode = mode;
          Machine m(cfg);
          m.load(one_message(mesh.size(), s, d));
          const SimStats st = m.run_until_idle();
          ASSERT_EQ(st.cycles, static_cast<std::uint64_t>(mesh.distance(s, d) + 1))
              << "s=" << s << " d=" << d << " mode=" << mode_name(mode);
          EXPECT_EQ(st.flit_hops, static_cast<std::uint64_t>(mesh.distance(s, d)));
        }
      }
    }
  }
}

TEST(Machine, CeilingReportsTimeout) {
  SimConfig cfg;
  cfg.mesh = {2, 1};
  cfg.cycle_ceiling = 2;
  Machine m(cfg);
  m.load(two_pe_program());
  const SimStats s = m.run_until_idle();
  EXPECT_FALSE(s.completed);
  EXPECT_EQ(s.cycles, 2u);
}

TEST(Machine, EnRouteExecutionOnlyInNexusMode) {
  for (Mode mode : {Mode::kNexus, Mode::kTia}) {
    SimConfig cfg;
    cfg.mesh = {3, 1};
    cfg.mode = mode;
    Machine m(cfg);
    ActiveMessage mul;
    mul.opcode = Opcode::kMul;
    mul.n_pc = kChainEnd;
    mul.r1 = mul.r2 = mul.r3 = 2;
    mul.op1 = 6;
    mul.op2 = 7;
    TileProgram p;
    p.stream.per_pe.resize(3);
    p.stream.per_pe[0].push_back(mul);
    std::vector<PeId> exec_at;
    m.set_trace([&](const TraceEvent& e) {
      if (e.kind == "exec" || e.kind == "divert") exec_at.push_back(e.pe);
    });
    m.load(p);
    const SimStats s = m.run_until_idle();
    ASSERT_EQ(exec_at.size(), 1u);
    EXPECT_EQ(s.alu_executions, 1u);
    EXPECT_EQ(s.chains_retired, 1u);
    if (mode == Mode::kNexus) {
      EXPECT_EQ(exec_at[0], 1u);
      EXPECT_EQ(s.innetwork_executions, 1u);
      EXPECT_EQ(s.flit_hops, 1u);
    } else {
      EXPECT_EQ(exec_at[0], 2u);
      EXPECT_EQ(s.innetwork_executions, 0u);
      EXPECT_EQ(s.flit_hops, 2u);
    }
  }
}

TEST(Machine, LimitedBandwidthSlowsRefill) {
  auto build = [] {
    TileProgram p;
    p.stream.per_pe.resize(4);
    for (int k = 0; k < 20; ++k) p.stream.per_pe[0].push_back(single_hop_message(0, 3));
    return p;
  };
  SimConfig fast;
  fast.mesh = {2, 2};
  fast.am_queue_capacity = 2;
  SimConfig slow = fast;
  slow.bandwidth = 1.0;
  Machine a(fast), b(slow);
  a.load(build());
  b.load(build());
  const SimStats sa = a.run_until_idle();
  const SimStats sb = b.run_until_idle();
  EXPECT_TRUE(sa.completed);
  EXPECT_TRUE(sb.completed);
  EXPECT_EQ(sa.chains_retired, 20u);
  EXPECT_EQ(sb.chains_retired, 20u);
  // 70-bit entries at 8 bits per cycle: at least 8 cycles per refilled entry.
  EXPECT_GE(sb.cycles, 18u * 8u);
  EXPECT_LT(sa.cycles, sb.cycles);
}

TEST(Machine, ContentionSerializesAtSharedDestination) {
  SimConfig cfg;
  cfg.mesh = {2, 2};
  Machine m(cfg);
  TileProgram p;
  p.stream.per_pe.resize(4);
  p.stream.per_pe[0].push_back(single_hop_message(0, 3));
  p.stream.per_pe[1].push_back(single_hop_message(1, 3));
  p.stream.per_pe[2].push_back(single_hop_message(2, 3));
  m.load(p);
  const SimStats s = m.run_until_idle();
  EXPECT_TRUE(s.completed);
  EXPECT_EQ(s.chains_retired, 3u);
  EXPECT_EQ(s.delivered_flits, 3u);
  EXPECT_GT(s.total_stalls(), 0u);
  EXPECT_GT(s.cycles, 3u);
}

TEST(Loading, CeilOfBytesOverBandwidth) {
  EXPECT_EQ(loading_cycles(1024, 3.0), 342u);
  EXPECT_EQ(loading_cycles(1024, 1024.0), 1u);
  EXPECT_EQ(loading_cycles(0, 2.0), 0u);
  EXPECT_EQ(loading_cycles(1024, kUnlimitedBandwidth), 0u);
}

TEST(Tiling, TotalsAreSumsOverTiles) {
  SimConfig cfg;
  cfg.mesh = {2, 1};
  cfg.bandwidth = 2.0;
  Machine m(cfg);
  const std::vector<TileProgram> tiles{two_pe_program(), two_pe_program()};
  std::vector<Word> after;
  const SimStats s = run_tiled(m, tiles, [&](std::size_t, const Machine& mm) { after.push_back(mm.pe(1).data_memory[0]); });
  ASSERT_EQ(s.tiles.size(), 2u);
  std::uint64_t sum = 0;
  for (const auto& t : s.tiles) {
    EXPECT_EQ(t.exec_cycles, 3u);
    EXPECT_EQ(t.load_cycles, loading_cycles(tiles[0].data_bytes(), 2.0));
    sum += t.exec_cycles + t.load_cycles;
  }
  EXPECT_EQ(s.cycles, sum);
  EXPECT_EQ(s.chains_retired, 2u);
  EXPECT_EQ(after, (std::vector<Word>{kN + kF * kH, kN + kF * kH}));
}

TEST(Tiling, ReusedMemoryCarriesOverAndCostsNoLoad) {
  SimConfig cfg;
  cfg.mesh = {2, 1};
  cfg.bandwidth = 2.0;
  Machine m(cfg);
  TileProgram second = two_pe_program();
  second.reuse_memory = true;
  EXPECT_EQ(second.data_bytes(), 0u);
  const SimStats s = run_tiled(m, {two_pe_program(), second});
  EXPECT_EQ(m.pe(1).data_memory[0], kN + 2 * kF * kH);
  EXPECT_EQ(s.tiles[1].load_cycles, 0u);
}

TEST(Config, ValidationRejectsBadValues) {
  SimConfig c;
  c.mesh = {5, 4};
  EXPECT_THROW(c.validate(), Error);
  c = SimConfig{};
  c.bandwidth = 0;
  EXPECT_THROW(c.validate(), Error);
  c = SimConfig{};
  c.am_queue_capacity = 0;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_NO_THROW(SimConfig{}.validate());
}

TEST(Stats, DerivedMetrics) {
  SimStats s(2);
  s.cycles = 10;
  s.busy = {5, 10};
  s.alu_executions = 8;
  s.innetwork_executions = 2;
  s.flit_hops = 3;
  s.stalls[0][index(Port::kWest)] = 4;
  s.stalls[1][index(Port::kWest)] = 1;
  EXPECT_DOUBLE_EQ(s.utilization(), 0.75);
  EXPECT_DOUBLE_EQ(s.innetwork_fraction(), 0.25);
  EXPECT_EQ(s.traffic_bits(), 210u);
  EXPECT_EQ(s.congestion_by_port()[index(Port::kWest)], 5u);
  EXPECT_EQ(s.total_stalls(), 5u);
}
