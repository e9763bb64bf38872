// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <bitset>
#include <cstdint>
#include <functional>
#include <numeric>
#include <set>
#include <vector>

#include "nexus/csr.hpp"
#include "nexus/error.hpp"

namespace nexus {

// Row-to-part assignment. Contiguous partitions also carry their N+1 boundaries;
// clustered partitions leave `boundaries` empty.
struct RowPartition {
  std::size_t parts = 0;
  std::vector<std::uint32_t> owner;
  std::vector<std::size_t> boundaries;

  bool contiguous() const { return !boundaries.empty(); }

  std::vector<std::size_t> rows_of(std::size_t part) const {
    std::vector<std::size_t> out;
    for (std::size_t r = 0; r < owner.size(); ++r) {
      if (owner[r] == part) out.push_back(r);
    }
    return out;
  }
};

inline RowPartition from_boundaries(std::vector<std::size_t> boundaries) {
  RowPartition p;
  p.parts = boundaries.size() - 1;
  p.owner.resize(boundaries.back());
  for (std::size_t i = 0; i < p.parts; ++i) {
    for (std::size_t r = boundaries[i]; r < boundaries[i + 1]; ++r) {
      p.owner[r] = static_cast<std::uint32_t>(i);
    }
  }
  p.boundaries = std::move(boundaries);
  return p;
}

inline std::size_t ceil_div(std::size_t a, std::size_t b) { return b == 0 ? 0 : (a + b - 1) / b; }

// One left-to-right scan over rowptr: a part closes as soon as its running nnz
// reaches ceil(nnz / N). Always yields exactly N parts; trailing parts may be empty.
inline RowPartition partition_nnz_balanced(const CsrMatrix& x, std::size_t n_parts) {
  if (n_parts == 0) throw Error(ErrorCode::kInvalidInput, "partition count must be >= 1");
  const std::size_t cap = std::max<std::size_t>(1, ceil_div(x.nnz(), n_parts));
  std::vector<std::size_t> b{0};
  std::size_t running = 0;
  for (std::size_t r = 0; r < x.rows && b.size() < n_parts; ++r) {
    running += x.row_nnz(r);
    if (running >= cap) {
      b.push_back(r + 1);
      running = 0;
    }
  }
  while (b.size() < n_parts + 1) b.push_back(x.rows);
  return from_boundaries(std::move(b));
}

// Uniform k-way contiguous split of `length` items, used for dense tensors.
inline RowPartition partition_uniform(std::size_t length, std::size_t n_parts) {
  if (n_parts == 0) throw Error(ErrorCode::kInvalidInput, "partition count must be >= 1");
  std::vector<std::size_t> b(n_parts + 1);
  for (std::size_t i = 0; i <= n_parts; ++i) b[i] = i * length / n_parts;
  return from_boundaries(std::move(b));
}

using BankSet = std::set<std::size_t>;
using ColumnOwner = std::function<std::size_t(std::size_t)>;

inline BankSet accessed_banks(const CsrMatrix& x, std::size_t row, const ColumnOwner& owner) {
  BankSet banks;
  for (std::size_t k = x.rowptr[row]; k < x.rowptr[row + 1]; ++k) banks.insert(owner(x.col[k]));
  return banks;
}

// |a symmetric-difference b|.
inline std::size_t dissimilarity(const BankSet& a, const BankSet& b) {
  std::size_t common = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++common;
      ++ia;
      ++ib;
    }
  }
  return a.size() + b.size() - 2 * common;
}

// Greedy agglomerative clustering: rows in descending nnz (stable), each joins the
// open cluster (running nnz below ceil(nnz/N)) with the smallest average
// dissimilarity to its members. Empty clusters average 0; ties go to the lowest index.
inline RowPartition cluster_rows_dissimilarity(const CsrMatrix& x, std::size_t n_parts,
                                               const ColumnOwner& owner) {
  if (n_parts == 0) throw Error(ErrorCode::kInvalidInput, "partition count must be >= 1");
  const std::size_t cap = ceil_div(x.nnz(), n_parts);

  std::vector<BankSet> banks(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) banks[r] = accessed_banks(x, r, owner);

  std::vector<std::size_t> order(x.rows);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x.row_nnz(a) > x.row_nnz(b); });

  RowPartition p;
  p.parts = n_parts;
  p.owner.assign(x.rows, 0);
  std::vector<std::vector<std::size_t>> members(n_parts);
  std::vector<std::size_t> load(n_parts, 0);

  for (std::size_t row : order) {
    bool any_open = false;
    for (std::size_t k = 0; k < n_parts; ++k) any_open |= load[k] < cap;

    std::size_t best = n_parts;
    std::size_t best_sum = 0;
    std::size_t best_cnt = 1;
    for (std::size_t k = 0; k < n_parts; ++k) {
      if (any_open && load[k] >= cap) continue;
      std::size_t sum = 0;
      for (std::size_t m : members[k]) sum += dissimilarity(banks[row], banks[m]);
      const std::size_t cnt = std::max<std::size_t>(1, members[k].size());
      // sum/cnt < best_sum/best_cnt, compared exactly.
      if (best == n_parts || sum * best_cnt < best_sum * cnt) {
        best = k;
        best_sum = sum;
        best_cnt = cnt;
      }
    }
    p.owner[row] = static_cast<std::uint32_t>(best);
    members[best].push_back(row);
    load[best] += x.row_nnz(row);
  }
  return p;
}

inline std::vector<std::size_t> part_nnz(const CsrMatrix& x, const RowPartition& p) {
  std::vector<std::size_t> out(p.parts, 0);
  for (std::size_t r = 0; r < x.rows; ++r) out[p.owner[r]] += x.row_nnz(r);
  return out;
}

// 128-element occupancy window used by the sparse metadata scanner.
struct BitVectorBlock {
  std::bitset<128> mask;
  std::uint32_t base = 0;
};

inline constexpr std::size_t kBlockSpan = 128;

inline std::vector<std::uint32_t> scan_bitvector(const BitVectorBlock& block) {
  std::vector<std::uint32_t> out;
  out.reserve(block.mask.count());
  for (std::size_t k = 0; k < kBlockSpan; ++k) {
    if (block.mask.test(k)) out.push_back(block.base + static_cast<std::uint32_t>(k));
  }
  return out;
}

// Encodes a strictly increasing coordinate list as 128-aligned blocks.
inline std::vector<BitVectorBlock> encode_bitvector(const std::vector<std::uint32_t>& coords) {
  std::vector<BitVectorBlock> blocks;
  for (std::uint32_t c : coords) {
    const std::uint32_t base = c - c % kBlockSpan;
    if (blocks.empty() || blocks.back().base != base) blocks.push_back({{}, base});
    blocks.back().mask.set(c - base);
  }
  return blocks;
}

}  // namespace nexus
