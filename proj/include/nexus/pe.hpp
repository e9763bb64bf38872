// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

// Processing element: Input NIC dispatch, compute unit, decode unit
// (dereference and streaming modes) and the AM network interface.

#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nexus/am.hpp"
#include "nexus/compiler.hpp"
#include "nexus/error.hpp"
#include "nexus/partition.hpp"

namespace nexus {

inline constexpr std::size_t kDataMemoryWords = 512;
// floor(8192 bits / 70 bits per entry)
inline constexpr std::size_t kAmQueueEntries = 116;
// Nominal staging depth: one slot per unit. Optional work (en-route diversion, local
// issue of a static AM) waits while the outbox holds this many messages. Ejection
// from the router never does, so the outbox can temporarily grow past it; letting
// ejection wait on injection space would close a dependency cycle through the
// router's LOCAL ports.
inline constexpr std::size_t kOutboxCapacity = 2;

struct StreamState {
  ActiveMessage source;
  Word base = 0;
  std::vector<std::uint32_t> coords;
  std::size_t next = 0;
};

struct PeState {
  PeId id = 0;
  std::vector<Word> data_memory = std::vector<Word>(kDataMemoryWords, 0);
  std::deque<ActiveMessage> am_queue;
  std::size_t am_queue_capacity = kAmQueueEntries;
  std::deque<ActiveMessage> offchip;  // static AMs not yet refilled into am_queue
  ConfigTable config;
  std::map<Word, std::vector<BitVectorBlock>> stream_metadata;  // keyed by base address

  std::deque<ActiveMessage> outbox;  // computed dynamic AMs awaiting injection
  std::optional<StreamState> stream;

  // Per-cycle unit state, cleared by begin_cycle().
  bool alu_busy = false;
  bool decode_busy = false;
  bool static_taken = false;

  void begin_cycle() {
    alu_busy = false;
    decode_busy = false;
    static_taken = false;
  }

  bool outbox_has_space() const { return outbox.size() < kOutboxCapacity; }
  bool decode_free() const { return !decode_busy && !stream.has_value(); }

  bool idle() const {
    return am_queue.empty() && offchip.empty() && outbox.empty() && !stream.has_value();
  }
};

inline void check_address(const PeState& pe, std::size_t addr) {
  if (addr >= pe.data_memory.size()) {
    throw Error(ErrorCode::kAddressOutOfRange,
                "PE " + std::to_string(pe.id) + " address " + std::to_string(addr));
  }
}

// Wrapping 16-bit ALU. DIV truncates toward zero on signed operands; x/0 = 0.
inline Word alu_result(Opcode op, Word a, Word b) {
  switch (op) {
    case Opcode::kAdd: return static_cast<Word>(a + b);
    case Opcode::kSub: return static_cast<Word>(a - b);
    case Opcode::kMul: return static_cast<Word>(static_cast<std::uint32_t>(a) * b);
    case Opcode::kDiv: {
      const auto sa = static_cast<std::int32_t>(static_cast<std::int16_t>(a));
      const auto sb = static_cast<std::int32_t>(static_cast<std::int16_t>(b));
      if (sb == 0) return 0;
      return static_cast<Word>(sa / sb);
    }
    default: throw Error(ErrorCode::kInvalidInput, "not an ALU opcode");
  }
}

enum class Dispatch { kCompute, kDecode, kRetire, kPassThrough };

// Input NIC: where a message delivered by the LOCAL output goes.
inline Dispatch input_nic_accept(const ActiveMessage& msg) {
  if (is_alu_class(msg.opcode)) return Dispatch::kCompute;
  if (is_memory_class(msg.opcode)) return Dispatch::kDecode;
  return msg.n_pc == kChainEnd ? Dispatch::kRetire : Dispatch::kPassThrough;
}

// Whether the unit that would take `msg` is free this cycle.
inline bool can_accept(const PeState& pe, const ActiveMessage& msg) {
  switch (input_nic_accept(msg)) {
    case Dispatch::kCompute: return !pe.alu_busy;
    case Dispatch::kDecode: return pe.decode_free();
    case Dispatch::kRetire:
    case Dispatch::kPassThrough: return true;
  }
  return false;
}

// Compute unit: result replaces op1. Destinations are left alone; ALU steps do not
// consume a destination wherever they execute.
inline ActiveMessage compute_execute(PeState& pe, ActiveMessage msg) {
  if (!is_alu_class(msg.opcode)) throw Error(ErrorCode::kInvalidInput, "compute unit got a non-ALU opcode");
  if (msg.op1_c != OperandTag::kValue || msg.op2_c != OperandTag::kValue) {
    throw Error(ErrorCode::kInvalidInput, "ALU operands must both be values");
  }
  msg.op1 = alu_result(msg.opcode, msg.op1, msg.op2);
  pe.alu_busy = true;
  return msg;
}

// Dereference mode. LOAD replaces its single ADDRESS operand with the stored word;
// ACC performs data_memory[result] += op1. Both consume r1 (the message was at its
// destination), so destinations rotate.
inline ActiveMessage decode_dereference(PeState& pe, ActiveMessage msg) {
  if (msg.opcode == Opcode::kLoad) {
    const bool a1 = msg.op1_c == OperandTag::kAddress;
    const bool a2 = msg.op2_c == OperandTag::kAddress;
    if (a1 == a2) throw Error(ErrorCode::kInvalidInput, "LOAD needs exactly one address operand");
    Word& field = a2 ? msg.op2 : msg.op1;
    check_address(pe, field);
    field = pe.data_memory[field];
    (a2 ? msg.op2_c : msg.op1_c) = OperandTag::kValue;
  } else if (msg.opcode == Opcode::kAcc) {
    check_address(pe, msg.result);
    Word& cell = pe.data_memory[msg.result];
    cell = static_cast<Word>(cell + msg.op1);
  } else {
    throw Error(ErrorCode::kInvalidInput, "dereference mode got " + std::string(opcode_name(msg.opcode)));
  }
  pe.decode_busy = true;
  return rotate_destinations(msg);
}

// Streaming mode setup: op2 is the base address; the scanner metadata registered at
// that base supplies the element coordinates (and hence the count).
inline void decode_stream_begin(PeState& pe, const ActiveMessage& msg) {
  if (msg.opcode != Opcode::kStream || msg.op2_c != OperandTag::kAddress) {
    throw Error(ErrorCode::kInvalidInput, "stream mode needs STREAM with an address base");
  }
  const auto it = pe.stream_metadata.find(msg.op2);
  if (it == pe.stream_metadata.end()) {
    throw Error(ErrorCode::kInvalidInput, "PE " + std::to_string(pe.id) + " has no stream metadata at " +
                                              std::to_string(msg.op2));
  }
  StreamState s;
  s.source = msg;
  s.base = msg.op2;
  for (const auto& block : it->second) {
    for (std::uint32_t c : scan_bitvector(block)) s.coords.push_back(c);
  }
  if (s.coords.empty()) throw Error(ErrorCode::kInvalidInput, "stream count must be >= 1");
  check_address(pe, std::size_t{s.base} + s.coords.size() - 1);
  pe.stream = std::move(s);
}

// One derived message per call: op2 <- word base+t, and the element coordinate is
// added to every ADDRESS-tagged field among op1 and result.
inline ActiveMessage decode_stream_next(PeState& pe) {
  StreamState& s = *pe.stream;
  ActiveMessage m = s.source;
  const std::size_t t = s.next++;
  const auto coord = static_cast<Word>(s.coords[t]);
  m.op2 = pe.data_memory[s.base + t];
  m.op2_c = OperandTag::kValue;
  if (m.op1_c == OperandTag::kAddress) m.op1 = static_cast<Word>(m.op1 + coord);
  if (m.res_c == OperandTag::kAddress) m.result = static_cast<Word>(m.result + coord);
  if (s.next == s.coords.size()) pe.stream.reset();
  pe.decode_busy = true;
  return rotate_destinations(m);
}

// Morph a computed dynamic AM into its successor using the replicated config memory.
inline ActiveMessage morph(const PeState& pe, const ActiveMessage& computed) {
  return apply_config(computed, pe.config.at(computed.n_pc));
}

}  // namespace nexus
