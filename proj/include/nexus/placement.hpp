// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "nexus/am.hpp"
#include "nexus/error.hpp"

namespace nexus {

using TensorId = std::uint8_t;

struct Location {
  PeId pe = 0;
  Word addr = 0;

  friend bool operator==(const Location&, const Location&) = default;
};

// Element coordinate -> (PE, local word address), with a bump allocator per PE.
class PlacementMap {
 public:
  PlacementMap(std::size_t pe_count, std::size_t words_per_pe)
      : next_free_(pe_count, 0), capacity_(words_per_pe) {}

  std::size_t pe_count() const { return next_free_.size(); }
  std::size_t capacity() const { return capacity_; }
  std::size_t used(PeId pe) const { return next_free_.at(pe); }

  // Reserves `count` consecutive words on `pe` and returns the first address.
  Word reserve(PeId pe, std::size_t count) {
    std::size_t& next = next_free_.at(pe);
    if (next + count > capacity_) {
      throw Error(ErrorCode::kCapacityExceeded,
                  "PE " + std::to_string(pe) + " needs " + std::to_string(next + count) +
                      " words, capacity " + std::to_string(capacity_));
    }
    const Word base = static_cast<Word>(next);
    next += count;
    return base;
  }

  Location place(TensorId tensor, std::uint64_t coord, PeId pe) {
    const Location loc{pe, reserve(pe, 1)};
    bind(tensor, coord, loc);
    return loc;
  }

  // Records a location inside an already reserved region.
  void bind(TensorId tensor, std::uint64_t coord, Location loc) {
    table_[{tensor, coord}] = loc;
  }

  std::optional<Location> find(TensorId tensor, std::uint64_t coord) const {
    const auto it = table_.find({tensor, coord});
    if (it == table_.end()) return std::nullopt;
    return it->second;
  }

  Location at(TensorId tensor, std::uint64_t coord) const {
    if (auto loc = find(tensor, coord)) return *loc;
    throw Error(ErrorCode::kUnplacedElement, "tensor " + std::to_string(tensor) + " element " +
                                                 std::to_string(coord) + " has no placement");
  }

  const std::map<std::pair<TensorId, std::uint64_t>, Location>& entries() const { return table_; }

 private:
  std::vector<std::size_t> next_free_;
  std::size_t capacity_;
  std::map<std::pair<TensorId, std::uint64_t>, Location> table_;
};

// Greedy co-placement. Output partition i sits on PE i; for each PE in order, the
// unassigned input partition with the largest affinity (elements referenced by
// output partition i) is taken, ties to the lowest partition index.
// affinity[i][j] = number of elements of input partition j referenced by output partition i.
inline std::vector<PeId> place_partitions(const std::vector<std::vector<std::size_t>>& affinity,
                                          std::size_t input_parts) {
  const std::size_t pes = affinity.size();
  std::vector<PeId> pe_of(input_parts, 0);
  std::vector<bool> taken(input_parts, false);
  std::size_t assigned = 0;
  for (std::size_t round = 0; assigned < input_parts; ++round) {
    for (std::size_t pe = 0; pe < pes && assigned < input_parts; ++pe) {
      std::size_t best = input_parts;
      for (std::size_t j = 0; j < input_parts; ++j) {
        if (taken[j]) continue;
        const std::size_t a = j < affinity[pe].size() ? affinity[pe][j] : 0;
        const std::size_t b =
            best < input_parts && best < affinity[pe].size() ? affinity[pe][best] : 0;
        if (best == input_parts || a > b) best = j;
      }
      taken[best] = true;
      pe_of[best] = static_cast<PeId>(pe);
      ++assigned;
    }
    if (pes == 0) break;
  }
  return pe_of;
}

}  // namespace nexus
