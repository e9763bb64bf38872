// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

// Kernel builders. Each builder pairs a kernel descriptor with a tile compiler that
// partitions, places and seeds one row/column tile, and with a reference oracle.

#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "nexus/compiler.hpp"
#include "nexus/csr.hpp"
#include "nexus/engine.hpp"
#include "nexus/error.hpp"
#include "nexus/oracle.hpp"
#include "nexus/partition.hpp"
#include "nexus/placement.hpp"

namespace nexus {

enum class PlacementStrategy { kNnzBalanced, kDissimilarity };

inline std::string_view strategy_name(PlacementStrategy s) {
  return s == PlacementStrategy::kDissimilarity ? "dissimilarity" : "nnz_balanced";
}

inline bool parse_strategy(std::string_view s, PlacementStrategy& out) {
  if (s == "nnz_balanced") out = PlacementStrategy::kNnzBalanced;
  else if (s == "dissimilarity") out = PlacementStrategy::kDissimilarity;
  else return false;
  return true;
}

// Where one output element lives once its tile (or final phase) has drained.
struct OutputSlot {
  Location loc;
  std::uint32_t row = 0;
  std::uint32_t col = 0;
};

struct CompiledStep {
  TileProgram program;
  std::vector<OutputSlot> outputs;
};

struct TileBounds {
  std::size_t r0 = 0, r1 = 0;  // output rows
  std::size_t c0 = 0, c1 = 0;  // output columns
};

using TileCompiler =
    std::function<std::vector<CompiledStep>(const TileBounds&, const SimConfig&, PlacementStrategy)>;

struct WorkloadInstance {
  std::string kernel;
  std::vector<KernelDescriptor> descriptors;  // one per synchronized phase
  std::size_t out_rows = 0;
  std::size_t out_cols = 0;
  bool column_tiling = false;
  std::function<DenseMatrix()> oracle;
  TileCompiler compile_tile;
};

// --- helpers ------------------------------------------------------------------

inline CsrMatrix slice_rows(const CsrMatrix& m, std::size_t r0, std::size_t r1) {
  CsrMatrix out;
  out.rows = r1 - r0;
  out.cols = m.cols;
  out.rowptr.assign(out.rows + 1, 0);
  for (std::size_t r = r0; r < r1; ++r) {
    for (std::size_t k = m.rowptr[r]; k < m.rowptr[r + 1]; ++k) {
      out.col.push_back(m.col[k]);
      out.vals.push_back(m.vals[k]);
    }
    out.rowptr[r - r0 + 1] = out.col.size();
  }
  return out;
}

// Keeps columns [c0, c1), renumbered from 0.
inline CsrMatrix slice_cols(const CsrMatrix& m, std::size_t c0, std::size_t c1) {
  CsrMatrix out;
  out.rows = m.rows;
  out.cols = c1 - c0;
  out.rowptr.assign(m.rows + 1, 0);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t k = m.rowptr[r]; k < m.rowptr[r + 1]; ++k) {
      if (m.col[k] >= c0 && m.col[k] < c1) {
        out.col.push_back(static_cast<std::uint32_t>(m.col[k] - c0));
        out.vals.push_back(m.vals[k]);
      }
    }
    out.rowptr[r + 1] = out.col.size();
  }
  return out;
}

inline RowPartition partition_first(const CsrMatrix& x, std::size_t n, PlacementStrategy s,
                                    const ColumnOwner& owner) {
  return s == PlacementStrategy::kDissimilarity ? cluster_rows_dissimilarity(x, n, owner)
                                                : partition_nnz_balanced(x, n);
}

using Affinity = std::vector<std::vector<std::size_t>>;

inline Affinity zero_affinity(std::size_t n) { return Affinity(n, std::vector<std::size_t>(n, 0)); }

// Accumulates per-PE memory images through the placement allocator.
class ImageBuilder {
 public:
  ImageBuilder(std::size_t pes, std::size_t words) : pm_(pes, words), mem_(pes), meta_(pes) {}

  Location alloc(PeId pe, const std::vector<Word>& values) {
    const Word base = pm_.reserve(pe, values.size());
    auto& m = mem_[pe];
    if (m.size() < base + values.size()) m.resize(base + values.size(), 0);
    std::copy(values.begin(), values.end(), m.begin() + base);
    return {pe, base};
  }

  Location alloc_zero(PeId pe, std::size_t count) { return alloc(pe, std::vector<Word>(count, 0)); }

  void register_stream(Location at, const std::vector<std::uint32_t>& coords) {
    meta_[at.pe][at.addr] = encode_bitvector(coords);
  }

  TileProgram program(const ConfigTable& table, StaticAmStream stream) && {
    TileProgram p;
    p.config = table;
    p.stream = std::move(stream);
    p.memory = std::move(mem_);
    p.metadata = std::move(meta_);
    return p;
  }

 private:
  PlacementMap pm_;
  std::vector<std::vector<Word>> mem_;
  std::vector<std::map<Word, std::vector<BitVectorBlock>>> meta_;
};

inline std::vector<std::uint32_t> iota_coords(std::size_t n) {
  std::vector<std::uint32_t> c(n);
  std::iota(c.begin(), c.end(), 0u);
  return c;
}

// --- descriptors ----------------------------------------------------------------

inline InstructionTemplate make_template(std::string name, Opcode op, OperandTag res, OperandTag op1,
                                         OperandTag op2, std::string dest) {
  return {std::move(name), op, res, op1, op2, std::move(dest)};
}

inline KernelDescriptor linear_descriptor(std::string name, std::vector<InstructionTemplate> t) {
  KernelDescriptor d{std::move(name), std::move(t), {}};
  for (std::size_t i = 1; i < d.templates.size(); ++i) d.edges.emplace_back(i - 1, i);
  return d;
}

constexpr OperandTag kV = OperandTag::kValue;
constexpr OperandTag kA = OperandTag::kAddress;

// Fetch a co-operand, multiply by the carried value, accumulate into the output.
inline KernelDescriptor spmv_descriptor(const std::string& operand = "y", const std::string& out = "z") {
  return linear_descriptor("spmv", {make_template("load", Opcode::kLoad, kA, kV, kA, operand),
                                    make_template("mul", Opcode::kMul, kA, kV, kV, out),
                                    make_template("acc", Opcode::kAcc, kA, kV, kV, out)});
}

inline KernelDescriptor gustavson_descriptor() {
  return linear_descriptor("spmspm", {make_template("stream_b_row", Opcode::kStream, kA, kV, kA, "b"),
                                      make_template("mul", Opcode::kMul, kA, kV, kV, "c"),
                                      make_template("acc", Opcode::kAcc, kA, kV, kV, "c")});
}

inline KernelDescriptor spadd_descriptor() {
  return linear_descriptor("spadd", {make_template("acc", Opcode::kAcc, kA, kV, kV, "c")});
}

// Phase 1 of SDDMM: stream U row i, fetch the matching V element, multiply, and
// accumulate the dot product into D(i,j).
inline KernelDescriptor sddmm_dot_descriptor() {
  return linear_descriptor("sddmm_dot", {make_template("stream_u_row", Opcode::kStream, kV, kA, kA, "u"),
                                         make_template("load_v", Opcode::kLoad, kV, kA, kV, "v"),
                                         make_template("mul", Opcode::kMul, kA, kV, kV, "o"),
                                         make_template("acc", Opcode::kAcc, kA, kV, kV, "o")});
}

// Phase 2: F(i,j) += s(i,j) * D(i,j).
inline KernelDescriptor sddmm_scale_descriptor() {
  KernelDescriptor d = spmv_descriptor("o", "o");
  d.name = "sddmm_scale";
  return d;
}

// --- tile compilers -------------------------------------------------------------

namespace detail {

inline std::vector<PeId> place(const Affinity& a) { return place_partitions(a, a.size()); }

inline std::vector<CompiledStep> spmv_tile(const CsrMatrix& x, const std::vector<Word>& y,
                                           const TileBounds& t, const SimConfig& cfg, PlacementStrategy s) {
  const std::size_t n = cfg.mesh.size();
  const CsrMatrix xt = slice_rows(x, t.r0, t.r1);
  const RowPartition zp = partition_nnz_balanced(xt, n);
  const RowPartition yp = partition_uniform(x.cols, n);
  const RowPartition xp = partition_first(xt, n, s, [&](std::size_t c) { return yp.owner[c]; });

  Affinity ax = zero_affinity(n), ay = zero_affinity(n);
  for (std::size_t r = 0; r < xt.rows; ++r) {
    for (std::size_t k = xt.rowptr[r]; k < xt.rowptr[r + 1]; ++k) {
      ++ax[zp.owner[r]][xp.owner[r]];
      ++ay[zp.owner[r]][yp.owner[xt.col[k]]];
    }
  }
  const auto pe_x = place(ax);
  const auto pe_y = place(ay);

  ImageBuilder ib(n, cfg.memory_words);
  std::vector<Location> z(xt.rows), yl(x.cols);
  for (std::size_t r = 0; r < xt.rows; ++r) z[r] = ib.alloc_zero(static_cast<PeId>(zp.owner[r]), 1);
  for (std::size_t c = 0; c < x.cols; ++c) yl[c] = ib.alloc(pe_y[yp.owner[c]], {y[c]});

  std::vector<ChainSeed> seeds;
  for (std::size_t r = 0; r < xt.rows; ++r) {
    for (std::size_t k = xt.rowptr[r]; k < xt.rowptr[r + 1]; ++k) {
      seeds.push_back({pe_x[xp.owner[r]], xt.vals[k], yl[xt.col[k]], z[r], std::nullopt});
    }
  }
  const ConfigTable table = lower_kernel(spmv_descriptor());
  CompiledStep step{std::move(ib).program(table, generate_static_ams(seeds, table, n)), {}};
  for (std::size_t r = 0; r < xt.rows; ++r) {
    step.outputs.push_back({z[r], static_cast<std::uint32_t>(t.r0 + r), 0});
  }
  return {std::move(step)};
}

// Gustavson: one STREAM chain per a(i,k) whose B row k is nonempty in this column tile.
inline std::vector<CompiledStep> gustavson_tile(const CsrMatrix& a, const CsrMatrix& b, bool dense,
                                                const TileBounds& t, const SimConfig& cfg,
                                                PlacementStrategy s) {
  const std::size_t n = cfg.mesh.size();
  const std::size_t width = t.c1 - t.c0;
  const CsrMatrix at = slice_rows(a, t.r0, t.r1);
  const CsrMatrix bt = slice_cols(b, t.c0, t.c1);
  const RowPartition zp = dense ? partition_uniform(at.rows, n) : partition_nnz_balanced(at, n);
  const RowPartition bp = dense ? partition_uniform(bt.rows, n) : partition_nnz_balanced(bt, n);
  const RowPartition xp = dense ? zp : partition_first(at, n, s, [&](std::size_t k) { return bp.owner[k]; });

  Affinity ax = zero_affinity(n), ab = zero_affinity(n);
  std::vector<bool> needed(bt.rows, false);
  for (std::size_t r = 0; r < at.rows; ++r) {
    for (std::size_t p = at.rowptr[r]; p < at.rowptr[r + 1]; ++p) {
      const std::size_t k = at.col[p];
      ++ax[zp.owner[r]][xp.owner[r]];
      ab[zp.owner[r]][bp.owner[k]] += bt.row_nnz(k);
      needed[k] = needed[k] || bt.row_nnz(k) > 0;
    }
  }
  const auto pe_x = place(ax);
  const auto pe_b = place(ab);

  ImageBuilder ib(n, cfg.memory_words);
  std::vector<Location> c(at.rows);
  for (std::size_t r = 0; r < at.rows; ++r) c[r] = ib.alloc_zero(static_cast<PeId>(zp.owner[r]), width);

  // Sparse: one copy of each needed B row on its placed PE. Dense: every PE that owns
  // output rows keeps its own copy of B, so rows of B pass by each output row locally
  // the way they would through a systolic array.
  std::vector<PeId> copies;
  if (dense) {
    for (std::size_t pe = 0; pe < n; ++pe) {
      if (!zp.rows_of(pe).empty()) copies.push_back(static_cast<PeId>(pe));
    }
  }
  std::map<std::pair<PeId, std::size_t>, Location> bl;
  auto place_row = [&](PeId pe, std::size_t k) {
    const auto lo = bt.rowptr[k], hi = bt.rowptr[k + 1];
    const Location l = ib.alloc(pe, std::vector<Word>(bt.vals.begin() + lo, bt.vals.begin() + hi));
    ib.register_stream(l, std::vector<std::uint32_t>(bt.col.begin() + lo, bt.col.begin() + hi));
    bl[{dense ? pe : PeId{0}, k}] = l;
  };
  for (std::size_t k = 0; k < bt.rows; ++k) {
    if (!needed[k]) continue;
    if (dense) {
      for (PeId pe : copies) place_row(pe, k);
    } else {
      place_row(pe_b[bp.owner[k]], k);
    }
  }

  std::vector<ChainSeed> seeds;
  for (std::size_t r = 0; r < at.rows; ++r) {
    for (std::size_t p = at.rowptr[r]; p < at.rowptr[r + 1]; ++p) {
      if (!needed[at.col[p]]) continue;
      const Location b_row = bl.at({dense ? c[r].pe : PeId{0}, at.col[p]});
      seeds.push_back({pe_x[xp.owner[r]], at.vals[p], b_row, c[r], std::nullopt});
    }
  }
  const ConfigTable table = lower_kernel(gustavson_descriptor());
  CompiledStep step{std::move(ib).program(table, generate_static_ams(seeds, table, n)), {}};
  for (std::size_t r = 0; r < at.rows; ++r) {
    for (std::size_t j = 0; j < width; ++j) {
      step.outputs.push_back({{c[r].pe, static_cast<Word>(c[r].addr + j)},
                              static_cast<std::uint32_t>(t.r0 + r), static_cast<std::uint32_t>(t.c0 + j)});
    }
  }
  return {std::move(step)};
}

// Output rows hold the union pattern of A and B, preloaded with B.
inline std::vector<CompiledStep> spadd_tile(const CsrMatrix& a, const CsrMatrix& b, const TileBounds& t,
                                            const SimConfig& cfg, PlacementStrategy s) {
  const std::size_t n = cfg.mesh.size();
  const CsrMatrix at = slice_rows(a, t.r0, t.r1);
  const CsrMatrix bt = slice_rows(b, t.r0, t.r1);
  const RowPartition zp = partition_nnz_balanced(at, n);
  const RowPartition cols = partition_uniform(a.cols, n);
  const RowPartition xp = partition_first(at, n, s, [&](std::size_t c) { return cols.owner[c]; });

  Affinity ax = zero_affinity(n);
  for (std::size_t r = 0; r < at.rows; ++r) ax[zp.owner[r]][xp.owner[r]] += at.row_nnz(r);
  const auto pe_x = place(ax);

  ImageBuilder ib(n, cfg.memory_words);
  std::vector<std::map<std::uint32_t, Location>> loc(at.rows);
  CompiledStep step;
  for (std::size_t r = 0; r < at.rows; ++r) {
    std::map<std::uint32_t, Word> row;
    for (std::size_t p = at.rowptr[r]; p < at.rowptr[r + 1]; ++p) row[at.col[p]] = 0;
    for (std::size_t p = bt.rowptr[r]; p < bt.rowptr[r + 1]; ++p) row[bt.col[p]] = bt.vals[p];
    std::vector<Word> vals;
    for (const auto& [col, v] : row) vals.push_back(v);
    const Location base = ib.alloc(static_cast<PeId>(zp.owner[r]), vals);
    Word off = 0;
    for (const auto& [col, v] : row) {
      loc[r][col] = {base.pe, static_cast<Word>(base.addr + off++)};
      step.outputs.push_back({loc[r][col], static_cast<std::uint32_t>(t.r0 + r), col});
    }
  }

  std::vector<ChainSeed> seeds;
  for (std::size_t r = 0; r < at.rows; ++r) {
    for (std::size_t p = at.rowptr[r]; p < at.rowptr[r + 1]; ++p) {
      const Location l = loc[r][at.col[p]];
      seeds.push_back({pe_x[xp.owner[r]], at.vals[p], l, l, std::nullopt});
    }
  }
  const ConfigTable table = lower_kernel(spadd_descriptor());
  step.program = std::move(ib).program(table, generate_static_ams(seeds, table, n));
  return {std::move(step)};
}

// Two synchronized phases over the same memories: D = dot products, then F = S .* D.
inline std::vector<CompiledStep> sddmm_tile(const CsrMatrix& sm, const DenseMatrix& u, const DenseMatrix& v,
                                            const TileBounds& t, const SimConfig& cfg, PlacementStrategy s) {
  const std::size_t n = cfg.mesh.size();
  const std::size_t d = u.cols;
  const CsrMatrix st = slice_rows(sm, t.r0, t.r1);
  const RowPartition zp = partition_nnz_balanced(st, n);
  const RowPartition up = partition_uniform(st.rows, n);
  const RowPartition vp = partition_uniform(sm.cols, n);
  const RowPartition xp = partition_first(st, n, s, [&](std::size_t c) { return vp.owner[c]; });

  Affinity ax = zero_affinity(n), au = zero_affinity(n), av = zero_affinity(n);
  std::vector<bool> col_used(sm.cols, false);
  for (std::size_t r = 0; r < st.rows; ++r) {
    for (std::size_t p = st.rowptr[r]; p < st.rowptr[r + 1]; ++p) {
      ++ax[zp.owner[r]][xp.owner[r]];
      ++au[zp.owner[r]][up.owner[r]];
      ++av[zp.owner[r]][vp.owner[st.col[p]]];
      col_used[st.col[p]] = true;
    }
  }
  const auto pe_x = place(ax);
  const auto pe_u = place(au);
  const auto pe_v = place(av);

  ImageBuilder ib(n, cfg.memory_words);
  std::vector<Location> dl(st.nnz()), fl(st.nnz()), ul(st.rows), vl(sm.cols);
  for (std::size_t r = 0; r < st.rows; ++r) {
    for (std::size_t p = st.rowptr[r]; p < st.rowptr[r + 1]; ++p) {
      dl[p] = ib.alloc_zero(static_cast<PeId>(zp.owner[r]), 1);
      fl[p] = ib.alloc_zero(static_cast<PeId>(zp.owner[r]), 1);
    }
  }
  for (std::size_t r = 0; r < st.rows; ++r) {
    if (st.row_nnz(r) == 0) continue;
    std::vector<Word> row(d);
    for (std::size_t k = 0; k < d; ++k) row[k] = u.at(t.r0 + r, k);
    ul[r] = ib.alloc(pe_u[up.owner[r]], row);
    ib.register_stream(ul[r], iota_coords(d));
  }
  for (std::size_t c = 0; c < sm.cols; ++c) {
    if (!col_used[c]) continue;
    std::vector<Word> col(d);
    for (std::size_t k = 0; k < d; ++k) col[k] = v.at(k, c);
    vl[c] = ib.alloc(pe_v[vp.owner[c]], col);
  }

  // The dot chain visits U, then V, then the output PE; `result.pe` only names r2.
  std::vector<ChainSeed> dot, scale;
  for (std::size_t r = 0; r < st.rows; ++r) {
    for (std::size_t p = st.rowptr[r]; p < st.rowptr[r + 1]; ++p) {
      const PeId home = pe_x[xp.owner[r]];
      const Location vcol = vl[st.col[p]];
      dot.push_back({home, vcol.addr, ul[r], {vcol.pe, dl[p].addr}, dl[p].pe});
      scale.push_back({home, st.vals[p], dl[p], fl[p], std::nullopt});
    }
  }
  const ConfigTable t1 = lower_kernel(sddmm_dot_descriptor());
  const ConfigTable t2 = lower_kernel(sddmm_scale_descriptor());
  CompiledStep phase1{std::move(ib).program(t1, generate_static_ams(dot, t1, n)), {}};
  CompiledStep phase2;
  phase2.program.config = t2;
  phase2.program.stream = generate_static_ams(scale, t2, n);
  phase2.program.reuse_memory = true;
  for (std::size_t r = 0; r < st.rows; ++r) {
    for (std::size_t p = st.rowptr[r]; p < st.rowptr[r + 1]; ++p) {
      phase2.outputs.push_back({fl[p], static_cast<std::uint32_t>(t.r0 + r), st.col[p]});
    }
  }
  std::vector<CompiledStep> out;
  out.push_back(std::move(phase1));
  out.push_back(std::move(phase2));
  return out;
}

}  // namespace detail

// --- builders -------------------------------------------------------------------

inline WorkloadInstance build_spmv(CsrMatrix x, std::vector<Word> y) {
  x.validate();
  if (y.size() != x.cols) throw Error(ErrorCode::kDimensionMismatch, "spmv: vector length != matrix cols");
  WorkloadInstance w;
  w.kernel = "spmv";
  w.descriptors = {spmv_descriptor()};
  w.out_rows = x.rows;
  w.out_cols = 1;
  w.oracle = [x, y] { return oracle::spmv(x, y); };
  w.compile_tile = [x, y](const TileBounds& t, const SimConfig& c, PlacementStrategy s) {
    return detail::spmv_tile(x, y, t, c, s);
  };
  return w;
}

inline WorkloadInstance build_spmspm(CsrMatrix a, CsrMatrix b) {
  a.validate();
  b.validate();
  if (a.cols != b.rows) throw Error(ErrorCode::kDimensionMismatch, "spmspm: A.cols != B.rows");
  WorkloadInstance w;
  w.kernel = "spmspm";
  w.descriptors = {gustavson_descriptor()};
  w.out_rows = a.rows;
  w.out_cols = b.cols;
  w.column_tiling = true;
  w.oracle = [a, b] { return oracle::spmspm(a, b); };
  w.compile_tile = [a, b](const TileBounds& t, const SimConfig& c, PlacementStrategy s) {
    return detail::gustavson_tile(a, b, false, t, c, s);
  };
  return w;
}

inline WorkloadInstance build_spadd(CsrMatrix a, CsrMatrix b) {
  a.validate();
  b.validate();
  if (a.rows != b.rows || a.cols != b.cols) throw Error(ErrorCode::kDimensionMismatch, "spadd: dims differ");
  WorkloadInstance w;
  w.kernel = "spadd";
  w.descriptors = {spadd_descriptor()};
  w.out_rows = a.rows;
  w.out_cols = a.cols;
  w.oracle = [a, b] { return oracle::spadd(a, b); };
  w.compile_tile = [a, b](const TileBounds& t, const SimConfig& c, PlacementStrategy s) {
    return detail::spadd_tile(a, b, t, c, s);
  };
  return w;
}

inline WorkloadInstance build_sddmm(CsrMatrix s, DenseMatrix u, DenseMatrix v) {
  s.validate();
  if (u.rows != s.rows || v.cols != s.cols || u.cols != v.rows) {
    throw Error(ErrorCode::kDimensionMismatch, "sddmm: need S m x n, U m x d, V d x n");
  }
  if (u.cols == 0) throw Error(ErrorCode::kDimensionMismatch, "sddmm: inner dimension must be >= 1");
  WorkloadInstance w;
  w.kernel = "sddmm";
  w.descriptors = {sddmm_dot_descriptor(), sddmm_scale_descriptor()};
  w.out_rows = s.rows;
  w.out_cols = s.cols;
  w.oracle = [s, u, v] { return oracle::sddmm(s, u, v); };
  w.compile_tile = [s, u, v](const TileBounds& t, const SimConfig& c, PlacementStrategy st) {
    return detail::sddmm_tile(s, u, v, t, c, st);
  };
  return w;
}

inline WorkloadInstance build_dense_matmul(DenseMatrix a, DenseMatrix b) {
  if (a.cols != b.rows) throw Error(ErrorCode::kDimensionMismatch, "matmul: A.cols != B.rows");
  WorkloadInstance w;
  w.kernel = "matmul";
  w.descriptors = {gustavson_descriptor()};
  w.descriptors[0].name = "matmul";
  w.out_rows = a.rows;
  w.out_cols = b.cols;
  w.column_tiling = true;
  w.oracle = [a, b] { return oracle::matmul(a, b); };
  // Every element, zeros included, is a chain participant.
  w.compile_tile = [ca = to_csr_full(a), cb = to_csr_full(b)](const TileBounds& t, const SimConfig& c,
                                                              PlacementStrategy s) {
    return detail::gustavson_tile(ca, cb, true, t, c, s);
  };
  return w;
}

// --- compilation and execution ------------------------------------------------

struct CompiledWorkload {
  std::vector<CompiledStep> steps;
  std::size_t tile_rows = 0;
  std::size_t tile_cols = 0;
  std::size_t tiles = 0;

  std::size_t static_ams() const {
    std::size_t n = 0;
    for (const auto& s : steps) n += s.program.stream.total();
    return n;
  }
};

inline std::vector<CompiledStep> compile_with_shape(const WorkloadInstance& w, const SimConfig& cfg,
                                                    PlacementStrategy s, std::size_t rows, std::size_t cols,
                                                    std::size_t& tiles) {
  std::vector<CompiledStep> steps;
  tiles = 0;
  for (std::size_t r0 = 0; r0 < w.out_rows; r0 += rows) {
    for (std::size_t c0 = 0; c0 < std::max<std::size_t>(w.out_cols, 1); c0 += cols) {
      const TileBounds t{r0, std::min(r0 + rows, w.out_rows), c0, std::min(c0 + cols, w.out_cols)};
      for (auto& step : w.compile_tile(t, cfg, s)) steps.push_back(std::move(step));
      ++tiles;
    }
  }
  return steps;
}

// Uses cfg.tile_rows when given; otherwise starts from the whole problem and halves
// the tile (rows first, then columns where the kernel allows it) until it fits.
inline CompiledWorkload compile_workload(const WorkloadInstance& w, const SimConfig& cfg, PlacementStrategy s) {
  cfg.validate();
  CompiledWorkload out;
  std::size_t rows = std::max<std::size_t>(1, cfg.tile_rows.value_or(w.out_rows));
  std::size_t cols = std::max<std::size_t>(1, w.out_cols);
  for (;;) {
    try {
      out.steps = compile_with_shape(w, cfg, s, rows, cols, out.tiles);
      out.tile_rows = rows;
      out.tile_cols = cols;
      return out;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kCapacityExceeded) throw;
      const bool can_rows = !cfg.tile_rows && rows > 1;
      const bool can_cols = w.column_tiling && cols > 1;
      if (can_rows && (rows >= cols || !can_cols)) {
        rows = (rows + 1) / 2;
      } else if (can_cols) {
        cols = (cols + 1) / 2;
      } else {
        throw Error(ErrorCode::kTileTooLarge, std::string(e.what()) + " (tile " + std::to_string(rows) + "x" +
                                                  std::to_string(cols) + ")");
      }
    }
  }
}

struct WorkloadRun {
  SimStats stats;
  DenseMatrix output;
  std::size_t tile_rows = 0;
  std::size_t tile_cols = 0;
  std::size_t tiles = 0;
  std::size_t static_ams = 0;
};

inline WorkloadRun run_workload(const WorkloadInstance& w, const SimConfig& cfg, PlacementStrategy s,
                                const TraceSink& trace = {}) {
  CompiledWorkload cw = compile_workload(w, cfg, s);
  Machine machine(cfg);
  if (trace) machine.set_trace(trace);
  std::vector<TileProgram> programs;
  programs.reserve(cw.steps.size());
  for (auto& step : cw.steps) programs.push_back(std::move(step.program));

  WorkloadRun run;
  run.output = DenseMatrix(w.out_rows, w.out_cols);
  run.tile_rows = cw.tile_rows;
  run.tile_cols = cw.tile_cols;
  run.tiles = cw.tiles;
  for (const auto& p : programs) run.static_ams += p.stream.total();
  run.stats = run_tiled(machine, programs, [&](std::size_t k, const Machine& m) {
    for (const OutputSlot& slot : cw.steps[k].outputs) {
      run.output.at(slot.row, slot.col) = m.pe(slot.loc.pe).data_memory.at(slot.loc.addr);
    }
  });
  return run;
}

}  // namespace nexus
