// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

// Active-message and configuration-entry codecs.
//
// An active message is a single 70-bit flit. Fields are packed
// most-significant first:
//
//   69..66 r1     65..62 r2     61..58 r3     57..54 n_pc
//   53..51 opcode 50 res_c      49 op1_c      48 op2_c
//   47..32 result 31..16 op1    15..0  op2
//
// A configuration entry is 10 bits: opcode(9..7) n_pc(6..3) res_c op1_c op2_c.

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace nexus {

using Word = std::uint16_t;
using PeId = std::uint8_t;

enum class Opcode : std::uint8_t {
  kNop = 0,
  kLoad = 1,
  kStream = 2,
  kAdd = 3,
  kSub = 4,
  kMul = 5,
  kDiv = 6,
  kAcc = 7,
};

constexpr bool is_memory_class(Opcode op) {
  return op == Opcode::kLoad || op == Opcode::kStream || op == Opcode::kAcc;
}

constexpr bool is_alu_class(Opcode op) {
  return op == Opcode::kAdd || op == Opcode::kSub || op == Opcode::kMul || op == Opcode::kDiv;
}

constexpr std::string_view opcode_name(Opcode op) {
  constexpr std::array<std::string_view, 8> kNames = {"NOP", "LOAD", "STREAM", "ADD",
                                                       "SUB", "MUL",  "DIV",    "ACC"};
  return kNames[static_cast<unsigned>(op) & 7u];
}

// Parses the mnemonic used in descriptor documents. Returns false on unknown names.
inline bool parse_opcode(std::string_view name, Opcode& out) {
  for (unsigned i = 0; i < 8; ++i) {
    if (opcode_name(static_cast<Opcode>(i)) == name) {
      out = static_cast<Opcode>(i);
      return true;
    }
  }
  return false;
}

// One bit per operand slot. VALUE encodes as 0 so the zero word is an all-value message.
enum class OperandTag : std::uint8_t { kValue = 0, kAddress = 1 };

// n_pc value that terminates a chain. Config memory holds at most 8 entries.
inline constexpr std::uint8_t kChainEnd = 15;
inline constexpr std::size_t kConfigCapacity = 8;

struct ActiveMessage {
  PeId r1 = 0;
  PeId r2 = 0;
  PeId r3 = 0;
  std::uint8_t n_pc = 0;
  Opcode opcode = Opcode::kNop;
  OperandTag res_c = OperandTag::kValue;
  OperandTag op1_c = OperandTag::kValue;
  OperandTag op2_c = OperandTag::kValue;
  Word result = 0;
  Word op1 = 0;
  Word op2 = 0;

  friend bool operator==(const ActiveMessage&, const ActiveMessage&) = default;
};

// 70-bit container. Bits above 69 are always zero.
class AmWord {
 public:
  using Bits = unsigned __int128;

  constexpr AmWord() = default;
  constexpr explicit AmWord(Bits bits) : bits_(bits & mask()) {}
  constexpr AmWord(std::uint8_t hi6, std::uint64_t lo64)
      : bits_((static_cast<Bits>(hi6 & 0x3Fu) << 64) | lo64) {}

  constexpr Bits bits() const { return bits_; }
  constexpr std::uint64_t low64() const { return static_cast<std::uint64_t>(bits_); }
  constexpr std::uint8_t high6() const { return static_cast<std::uint8_t>(bits_ >> 64); }

  // Extracts `width` bits whose least significant bit sits at `lsb`.
  constexpr std::uint64_t field(unsigned lsb, unsigned width) const {
    return static_cast<std::uint64_t>((bits_ >> lsb) & ((Bits{1} << width) - 1));
  }

  static constexpr unsigned kWidth = 70;
  static constexpr Bits mask() { return (Bits{1} << kWidth) - 1; }

  friend constexpr bool operator==(const AmWord&, const AmWord&) = default;

 private:
  Bits bits_ = 0;
};

namespace am_layout {
inline constexpr unsigned kR1 = 66;
inline constexpr unsigned kR2 = 62;
inline constexpr unsigned kR3 = 58;
inline constexpr unsigned kNpc = 54;
inline constexpr unsigned kOpcode = 51;
inline constexpr unsigned kResC = 50;
inline constexpr unsigned kOp1C = 49;
inline constexpr unsigned kOp2C = 48;
inline constexpr unsigned kResult = 32;
inline constexpr unsigned kOp1 = 16;
inline constexpr unsigned kOp2 = 0;
}  // namespace am_layout

constexpr AmWord encode_am(const ActiveMessage& m) {
  using B = AmWord::Bits;
  using namespace am_layout;
  B w = 0;
  w |= static_cast<B>(m.r1 & 0xFu) << kR1;
  w |= static_cast<B>(m.r2 & 0xFu) << kR2;
  w |= static_cast<B>(m.r3 & 0xFu) << kR3;
  w |= static_cast<B>(m.n_pc & 0xFu) << kNpc;
  w |= static_cast<B>(static_cast<unsigned>(m.opcode) & 0x7u) << kOpcode;
  w |= static_cast<B>(static_cast<unsigned>(m.res_c) & 1u) << kResC;
  w |= static_cast<B>(static_cast<unsigned>(m.op1_c) & 1u) << kOp1C;
  w |= static_cast<B>(static_cast<unsigned>(m.op2_c) & 1u) << kOp2C;
  w |= static_cast<B>(m.result) << kResult;
  w |= static_cast<B>(m.op1) << kOp1;
  w |= static_cast<B>(m.op2) << kOp2;
  return AmWord(w);
}

constexpr ActiveMessage decode_am(const AmWord& w) {
  using namespace am_layout;
  ActiveMessage m;
  m.r1 = static_cast<PeId>(w.field(kR1, 4));
  m.r2 = static_cast<PeId>(w.field(kR2, 4));
  m.r3 = static_cast<PeId>(w.field(kR3, 4));
  m.n_pc = static_cast<std::uint8_t>(w.field(kNpc, 4));
  m.opcode = static_cast<Opcode>(w.field(kOpcode, 3));
  m.res_c = static_cast<OperandTag>(w.field(kResC, 1));
  m.op1_c = static_cast<OperandTag>(w.field(kOp1C, 1));
  m.op2_c = static_cast<OperandTag>(w.field(kOp2C, 1));
  m.result = static_cast<Word>(w.field(kResult, 16));
  m.op1 = static_cast<Word>(w.field(kOp1, 16));
  m.op2 = static_cast<Word>(w.field(kOp2, 16));
  return m;
}

// r1 <- r2, r2 <- r3, r3 <- old r1.
constexpr ActiveMessage rotate_destinations(ActiveMessage m) {
  const PeId head = m.r1;
  m.r1 = m.r2;
  m.r2 = m.r3;
  m.r3 = head;
  return m;
}

struct ConfigEntry {
  Opcode opcode = Opcode::kNop;
  std::uint8_t n_pc = 0;
  OperandTag res_c = OperandTag::kValue;
  OperandTag op1_c = OperandTag::kValue;
  OperandTag op2_c = OperandTag::kValue;

  friend bool operator==(const ConfigEntry&, const ConfigEntry&) = default;
};

constexpr std::uint16_t encode_config(const ConfigEntry& e) {
  return static_cast<std::uint16_t>(((static_cast<unsigned>(e.opcode) & 7u) << 7) |
                                    ((e.n_pc & 0xFu) << 3) |
                                    ((static_cast<unsigned>(e.res_c) & 1u) << 2) |
                                    ((static_cast<unsigned>(e.op1_c) & 1u) << 1) |
                                    (static_cast<unsigned>(e.op2_c) & 1u));
}

constexpr ConfigEntry decode_config(std::uint16_t w) {
  ConfigEntry e;
  e.opcode = static_cast<Opcode>((w >> 7) & 7u);
  e.n_pc = static_cast<std::uint8_t>((w >> 3) & 0xFu);
  e.res_c = static_cast<OperandTag>((w >> 2) & 1u);
  e.op1_c = static_cast<OperandTag>((w >> 1) & 1u);
  e.op2_c = static_cast<OperandTag>(w & 1u);
  return e;
}

// Overwrites the configuration-sourced fields of a message (opcode, n_pc, tags).
constexpr ActiveMessage apply_config(ActiveMessage m, const ConfigEntry& e) {
  m.opcode = e.opcode;
  m.n_pc = e.n_pc;
  m.res_c = e.res_c;
  m.op1_c = e.op1_c;
  m.op2_c = e.op2_c;
  return m;
}

// Wire form: 9 bytes, big-endian, top two bits of byte 0 always zero.
using AmBytes = std::array<std::uint8_t, 9>;

constexpr AmBytes to_bytes(const AmWord& w) {
  AmBytes out{};
  for (int i = 8; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(w.bits() >> (8 * (8 - i)));
  }
  return out;
}

constexpr AmWord from_bytes(const AmBytes& b) {
  AmWord::Bits bits = 0;
  for (std::uint8_t byte : b) bits = (bits << 8) | byte;
  return AmWord(bits);
}

inline std::string to_hex(const AmWord& w) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s;
  for (std::uint8_t byte : to_bytes(w)) {
    s.push_back(kDigits[byte >> 4]);
    s.push_back(kDigits[byte & 0xF]);
  }
  return s;
}

}  // namespace nexus
