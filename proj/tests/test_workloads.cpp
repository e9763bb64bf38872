// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <optional>
#include <tuple>

#include "nexus/generators.hpp"
#include "nexus/workloads.hpp"

using namespace nexus;

namespace {

// Test-side references built on dense triple loops over the expanded operands. They
// share nothing with the library oracles beyond the 16-bit wrapping convention.
using Grid = std::vector<std::vector<std::uint32_t>>;

Grid expand(const CsrMatrix& m) {
  Grid g(m.rows, std::vector<std::uint32_t>(m.cols, 0));
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t k = m.rowptr[r]; k < m.rowptr[r + 1]; ++k) g[r][m.col[k]] += m.vals[k];
  return g;
}

Grid expand(const DenseMatrix& m) {
  Grid g(m.rows, std::vector<std::uint32_t>(m.cols, 0));
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) g[r][c] = m.at(r, c);
  return g;
}

DenseMatrix narrow(const Grid& g, std::size_t rows, std::size_t cols) {
  DenseMatrix d(rows, cols);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) d.at(r, c) = static_cast<Word>(g[r][c] & 0xFFFFu);
  return d;
}

Grid product(const Grid& a, const Grid& b, std::size_t n, std::size_t k, std::size_t m) {
  Grid c(n, std::vector<std::uint32_t>(m, 0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      for (std::size_t t = 0; t < k; ++t) c[i][j] += (a[i][t] * b[t][j]) & 0xFFFFu;
  return c;
}

DenseMatrix ref_spmv(const CsrMatrix& x, const std::vector<Word>& y) {
  Grid v(y.size(), std::vector<std::uint32_t>(1));
  for (std::size_t i = 0; i < y.size(); ++i) v[i][0] = y[i];
  return narrow(product(expand(x), v, x.rows, x.cols, 1), x.rows, 1);
}

DenseMatrix ref_matmul(const Grid& a, const Grid& b, std::size_t n, std::size_t k, std::size_t m) {
  return narrow(product(a, b, n, k, m), n, m);
}

DenseMatrix ref_spadd(const CsrMatrix& a, const CsrMatrix& b) {
  Grid ga = expand(a), gb = expand(b);
  for (std::size_t r = 0; r < a.rows; ++r)
    for (std::size_t c = 0; c < a.cols; ++c) ga[r][c] += gb[r][c];
  return narrow(ga, a.rows, a.cols);
}

DenseMatrix ref_sddmm(const CsrMatrix& s, const DenseMatrix& u, const DenseMatrix& v) {
  const Grid uv = product(expand(u), expand(v), u.rows, u.cols, v.cols);
  const Grid gs = expand(s);
  Grid out(s.rows, std::vector<std::uint32_t>(s.cols, 0));
  for (std::size_t r = 0; r < s.rows; ++r)
    for (std::size_t k = s.rowptr[r]; k < s.rowptr[r + 1]; ++k) {
      const std::uint32_t c = s.col[k];
      out[r][c] = (gs[r][c] & 0xFFFFu) * (uv[r][c] & 0xFFFFu);
    }
  return narrow(out, s.rows, s.cols);
}

void expect_conserved(const SimStats& s) {
  EXPECT_TRUE(s.completed);
  EXPECT_EQ(s.chains_injected, s.chains_retired);
  EXPECT_EQ(s.injected_flits, s.delivered_flits + s.diverted_flits);
  EXPECT_EQ(s.buffer_overflows, 0u);
  EXPECT_EQ(s.illegal_turns, 0u);
}

SimConfig config_for(Mode mode, std::uint64_t seed) {
  SimConfig c;
  c.mode = mode;
  c.seed = seed;
  c.cycle_ceiling = 2'000'000;
  return c;
}

const Mode kModes[] = {Mode::kNexus, Mode::kTia, Mode::kTiaValiant};

class KernelModes : public ::testing::TestWithParam<std::tuple<Mode, std::uint64_t>> {};

}  // namespace

TEST_P(KernelModes, SpmvMatchesReference) {
  const auto [mode, seed] = GetParam();
  Rng rng(seed);
  const CsrMatrix x = random_csr(24 + seed % 9, 20 + seed % 7, 0.1 + 0.05 * (seed % 7), rng);
  const auto y = random_vector(x.cols, rng);
  const WorkloadRun run = run_workload(build_spmv(x, y), config_for(mode, seed), PlacementStrategy::kNnzBalanced);
  EXPECT_EQ(run.output, ref_spmv(x, y));
  EXPECT_EQ(run.static_ams, x.nnz());
  expect_conserved(run.stats);
}

TEST_P(KernelModes, SpmspmMatchesReference) {
  const auto [mode, seed] = GetParam();
  Rng rng(seed + 100);
  const CsrMatrix a = random_csr(16, 12 + seed % 5, 0.15 + 0.05 * (seed % 5), rng);
  const CsrMatrix b = random_csr(a.cols, 14, 0.2 + 0.05 * (seed % 4), rng);
  const WorkloadRun run =
      run_workload(build_spmspm(a, b), config_for(mode, seed), PlacementStrategy::kDissimilarity);
  EXPECT_EQ(run.output, ref_matmul(expand(a), expand(b), a.rows, a.cols, b.cols));
  std::size_t expected_seeds = 0;
  for (std::size_t k = 0; k < a.nnz(); ++k) expected_seeds += b.row_nnz(a.col[k]) > 0 ? 1 : 0;
  if (run.tiles == 1) EXPECT_EQ(run.static_ams, expected_seeds);
  expect_conserved(run.stats);
}

TEST_P(KernelModes, SpaddMatchesReference) {
  const auto [mode, seed] = GetParam();
  Rng rng(seed + 200);
  const CsrMatrix a = random_csr(20, 18, 0.1 + 0.04 * (seed % 8), rng);
  const CsrMatrix b = random_csr(20, 18, 0.3, rng);
  const WorkloadRun run = run_workload(build_spadd(a, b), config_for(mode, seed), PlacementStrategy::kNnzBalanced);
  EXPECT_EQ(run.output, ref_spadd(a, b));
  EXPECT_EQ(run.static_ams, a.nnz());
  expect_conserved(run.stats);
}

TEST_P(KernelModes, SddmmMatchesReference) {
  const auto [mode, seed] = GetParam();
  Rng rng(seed + 300);
  const std::size_t d = 1 + seed % 6;
  const CsrMatrix s = random_csr(18, 16, 0.1 + 0.05 * (seed % 6), rng);
  const DenseMatrix u = random_dense(18, d, rng);
  const DenseMatrix v = random_dense(d, 16, rng);
  const WorkloadRun run = run_workload(build_sddmm(s, u, v), config_for(mode, seed), PlacementStrategy::kNnzBalanced);
  EXPECT_EQ(run.output, ref_sddmm(s, u, v));
  if (run.tiles == 1) EXPECT_EQ(run.static_ams, 2 * s.nnz());
  expect_conserved(run.stats);
}

TEST_P(KernelModes, DenseMatmulMatchesReference) {
  const auto [mode, seed] = GetParam();
  Rng rng(seed + 400);
  const DenseMatrix a = random_dense(8 + seed % 5, 6, rng);
  const DenseMatrix b = random_dense(6, 7, rng);
  const WorkloadRun run =
      run_workload(build_dense_matmul(a, b), config_for(mode, seed), PlacementStrategy::kNnzBalanced);
  EXPECT_EQ(run.output, ref_matmul(expand(a), expand(b), a.rows, a.cols, b.cols));
  expect_conserved(run.stats);
}

INSTANTIATE_TEST_SUITE_P(AllModes, KernelModes,
                         ::testing::Combine(::testing::ValuesIn(kModes), ::testing::Values(1u, 2u, 3u, 4u, 5u)),
                         [](const auto& info) {
                           return std::string(mode_name(std::get<0>(info.param))) + "_" +
                                  std::to_string(std::get<1>(info.param));
                         });

TEST(Identities, TimesIdentityIsUnchanged) {
  Rng rng(9);
  const CsrMatrix a = random_csr(12, 10, 0.3, rng);
  std::vector<std::tuple<std::size_t, std::size_t, Word>> t;
  for (std::size_t i = 0; i < 10; ++i) t.emplace_back(i, i, 1);
  const CsrMatrix eye = csr_from_triplets(10, 10, t);
  const WorkloadRun run = run_workload(build_spmspm(a, eye), SimConfig{}, PlacementStrategy::kNnzBalanced);
  EXPECT_EQ(run.output, to_dense(a));
}

TEST(Identities, PlusZeroAndPlusNegation) {
  Rng rng(10);
  const CsrMatrix a = random_csr(12, 10, 0.4, rng);
  const CsrMatrix zero = csr_from_triplets(12, 10, {});
  EXPECT_EQ(run_workload(build_spadd(a, zero), SimConfig{}, PlacementStrategy::kNnzBalanced).output, to_dense(a));
  CsrMatrix neg = a;
  for (auto& v : neg.vals) v = static_cast<Word>(-v);
  EXPECT_EQ(run_workload(build_spadd(a, neg), SimConfig{}, PlacementStrategy::kNnzBalanced).output,
            DenseMatrix(12, 10));
}

TEST(Identities, SpmvWithUnitVectorSelectsColumn) {
  Rng rng(11);
  const CsrMatrix x = random_csr(16, 8, 0.5, rng);
  std::vector<Word> e(8, 0);
  e[3] = 1;
  const DenseMatrix out = run_workload(build_spmv(x, e), SimConfig{}, PlacementStrategy::kNnzBalanced).output;
  const DenseMatrix dx = to_dense(x);
  for (std::size_t r = 0; r < 16; ++r) EXPECT_EQ(out.at(r, 0), dx.at(r, 3));
}

TEST(Identities, EmptyOperandsProduceZeros) {
  const CsrMatrix a = csr_from_triplets(6, 6, {});
  const WorkloadRun run = run_workload(build_spmv(a, std::vector<Word>(6, 5)), SimConfig{}, PlacementStrategy::kNnzBalanced);
  EXPECT_EQ(run.output, DenseMatrix(6, 1));
  EXPECT_EQ(run.stats.chains_injected, 0u);
}

TEST(Tiling, SmallMemoryForcesTilesAndKeepsResults) {
  Rng rng(12);
  const CsrMatrix a = random_csr(32, 24, 0.3, rng);
  const CsrMatrix b = random_csr(24, 32, 0.3, rng);
  SimConfig small;
  small.memory_words = 48;
  const WorkloadRun run = run_workload(build_spmspm(a, b), small, PlacementStrategy::kNnzBalanced);
  EXPECT_GT(run.tiles, 1u);
  EXPECT_EQ(run.output, ref_matmul(expand(a), expand(b), 32, 24, 32));
  EXPECT_EQ(run.stats.tiles.size(), run.tiles);
  std::uint64_t sum = 0;
  for (const auto& t : run.stats.tiles) sum += t.exec_cycles + t.load_cycles;
  EXPECT_EQ(run.stats.cycles, sum);
}

TEST(Tiling, ForcedTileRowsPartitionTheOutput) {
  Rng rng(13);
  const CsrMatrix x = random_csr(40, 16, 0.3, rng);
  const auto y = random_vector(16, rng);
  SimConfig cfg;
  cfg.tile_rows = 8;
  const WorkloadRun run = run_workload(build_spmv(x, y), cfg, PlacementStrategy::kNnzBalanced);
  EXPECT_EQ(run.tiles, 5u);
  EXPECT_EQ(run.tile_rows, 8u);
  EXPECT_EQ(run.output, ref_spmv(x, y));
}

TEST(Tiling, ImpossibleTileIsReported) {
  Rng rng(14);
  const CsrMatrix x = random_csr(16, 64, 0.9, rng);
  SimConfig cfg;
  cfg.memory_words = 4;
  try {
    run_workload(build_spmv(x, random_vector(64, rng)), cfg, PlacementStrategy::kNnzBalanced);
    FAIL() << "expected tile-too-large";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kTileTooLarge);
  }
}

TEST(Tiling, BandwidthAddsLoadCycles) {
  Rng rng(15);
  const CsrMatrix x = random_csr(16, 16, 0.3, rng);
  const auto y = random_vector(16, rng);
  SimConfig slow;
  slow.bandwidth = 4.0;
  const WorkloadRun a = run_workload(build_spmv(x, y), SimConfig{}, PlacementStrategy::kNnzBalanced);
  const WorkloadRun b = run_workload(build_spmv(x, y), slow, PlacementStrategy::kNnzBalanced);
  EXPECT_EQ(a.output, b.output);
  EXPECT_GT(b.stats.tiles.at(0).load_cycles, 0u);
  EXPECT_GT(b.stats.cycles, a.stats.cycles);
}

TEST(Errors, DimensionMismatches) {
  Rng rng(16);
  const CsrMatrix a = random_csr(4, 5, 0.5, rng);
  const auto code = [](auto&& f) -> std::optional<ErrorCode> {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return std::nullopt;
  };
  EXPECT_EQ(code([&] { build_spmv(a, std::vector<Word>(4)); }), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(code([&] { build_spmspm(a, a); }), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(code([&] { build_spadd(a, random_csr(5, 4, 0.5, rng)); }), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(code([&] { build_sddmm(a, DenseMatrix(4, 2), DenseMatrix(3, 5)); }), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(code([&] { build_sddmm(a, DenseMatrix(4, 0), DenseMatrix(0, 5)); }), ErrorCode::kDimensionMismatch);
  EXPECT_EQ(code([&] { build_dense_matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)); }), ErrorCode::kDimensionMismatch);
}

TEST(Behaviour, SparseSpmspmExecutesInNetworkOnlyInNexusMode) {
  Rng rng(17);
  const CsrMatrix a = random_csr(32, 32, 0.5, rng);
  const CsrMatrix b = random_csr(32, 32, 0.5, rng);
  const auto w = build_spmspm(a, b);
  const WorkloadRun nexus = run_workload(w, config_for(Mode::kNexus, 1), PlacementStrategy::kNnzBalanced);
  const WorkloadRun tia = run_workload(w, config_for(Mode::kTia, 1), PlacementStrategy::kNnzBalanced);
  EXPECT_GT(nexus.stats.innetwork_executions, 0u);
  EXPECT_EQ(tia.stats.innetwork_executions, 0u);
  EXPECT_EQ(nexus.stats.alu_executions, tia.stats.alu_executions);
}

TEST(Behaviour, MoreNonzerosMeanMoreChains) {
  std::uint64_t prev = 0;
  for (double density : {0.1, 0.3, 0.6, 0.9}) {
    Rng rng(18);
    const CsrMatrix x = random_csr(24, 24, density, rng);
    const auto y = random_vector(24, rng);
    const WorkloadRun run = run_workload(build_spmv(x, y), SimConfig{}, PlacementStrategy::kNnzBalanced);
    EXPECT_EQ(run.stats.chains_injected, x.nnz());
    EXPECT_GE(run.stats.chains_injected, prev);
    prev = run.stats.chains_injected;
  }
}

TEST(Behaviour, SameSeedSameStats) {
  Rng rng(19);
  const CsrMatrix x = random_csr(32, 32, 0.3, rng);
  const auto y = random_vector(32, rng);
  const auto w = build_spmv(x, y);
  const SimConfig cfg = config_for(Mode::kTiaValiant, 77);
  const WorkloadRun a = run_workload(w, cfg, PlacementStrategy::kDissimilarity);
  const WorkloadRun b = run_workload(w, cfg, PlacementStrategy::kDissimilarity);
  EXPECT_EQ(a.stats.cycles, b.stats.cycles);
  EXPECT_EQ(a.stats.busy, b.stats.busy);
  EXPECT_EQ(a.stats.flit_hops, b.stats.flit_hops);
}

TEST(Generators, SkewMatrixHotRowShare) {
  Rng rng(20);
  const CsrMatrix m = skew_matrix(64, 128, 32, 0.5, rng);
  EXPECT_EQ(m.row_nnz(32), 128u);
  EXPECT_GE(static_cast<double>(m.row_nnz(32)) / static_cast<double>(m.nnz()), 0.5);
}

TEST(Generators, MixDensitiesInRange) {
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    const auto [a, b] = sample_mix(SparsityMix::kS2, rng);
    EXPECT_GE(a, 0.10);
    EXPECT_LE(a, 0.40);
    EXPECT_GE(b, 0.40);
    EXPECT_LE(b, 0.70);
  }
  SparsityMix m{};
  EXPECT_TRUE(parse_mix("S3", m));
  EXPECT_EQ(m, SparsityMix::kS3);
  EXPECT_FALSE(parse_mix("S5", m));
}
