// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

// Seeded random instances. Every generator draws only from the engine it is handed,
// so (dims, density, seed) reproduce an instance exactly.

#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "nexus/csr.hpp"
#include "nexus/error.hpp"

namespace nexus {

using Rng = std::mt19937_64;

// Nonzero magnitude in [1, 127] with a random sign.
inline Word random_value(Rng& rng) {
  std::uniform_int_distribution<int> mag(1, 127);
  std::bernoulli_distribution neg(0.5);
  const int v = mag(rng);
  return quantize(neg(rng) ? -v : v);
}

inline CsrMatrix random_csr(std::size_t rows, std::size_t cols, double density, Rng& rng) {
  if (density < 0.0 || density > 1.0) throw Error(ErrorCode::kInvalidInput, "density must lie in [0,1]");
  std::bernoulli_distribution keep(density);
  std::vector<std::tuple<std::size_t, std::size_t, Word>> t;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (keep(rng)) t.emplace_back(r, c, random_value(rng));
    }
  }
  return csr_from_triplets(rows, cols, std::move(t));
}

inline DenseMatrix random_dense(std::size_t rows, std::size_t cols, Rng& rng) {
  DenseMatrix d(rows, cols);
  for (auto& w : d.data) w = random_value(rng);
  return d;
}

inline std::vector<Word> random_vector(std::size_t n, Rng& rng) {
  std::vector<Word> v(n);
  for (auto& w : v) w = random_value(rng);
  return v;
}

// Sparsity classes for SpMSpM pairs. Moderate sparsity is 30-60% zeros, high is 60-90%.
enum class SparsityMix { kS1, kS2, kS3, kS4 };

inline bool parse_mix(std::string_view s, SparsityMix& out) {
  if (s == "S1") out = SparsityMix::kS1;
  else if (s == "S2") out = SparsityMix::kS2;
  else if (s == "S3") out = SparsityMix::kS3;
  else if (s == "S4") out = SparsityMix::kS4;
  else return false;
  return true;
}

// Returns (density of A, density of B).
inline std::pair<double, double> sample_mix(SparsityMix mix, Rng& rng) {
  std::uniform_real_distribution<double> moderate(0.40, 0.70);
  std::uniform_real_distribution<double> high(0.10, 0.40);
  switch (mix) {
    case SparsityMix::kS1: { const double a = moderate(rng); return {a, moderate(rng)}; }
    case SparsityMix::kS2: { const double a = high(rng); return {a, moderate(rng)}; }
    case SparsityMix::kS3: { const double a = moderate(rng); return {a, high(rng)}; }
    case SparsityMix::kS4: { const double a = high(rng); return {a, high(rng)}; }
  }
  return {0.5, 0.5};
}

// SpMV matrix in which row `hot` is fully dense and the remaining rows are sparse
// enough that the hot row receives at least `hot_share` of all accumulations.
inline CsrMatrix skew_matrix(std::size_t rows, std::size_t cols, std::size_t hot, double hot_share,
                             Rng& rng) {
  if (hot >= rows || hot_share <= 0.0 || hot_share > 1.0) {
    throw Error(ErrorCode::kInvalidInput, "bad skew parameters");
  }
  // Other rows share at most cols * (1 - s) / s nonzeros in total.
  const double budget = static_cast<double>(cols) * (1.0 - hot_share) / hot_share;
  const double density = rows > 1 ? std::min(1.0, budget / static_cast<double>((rows - 1) * cols)) : 0.0;
  std::bernoulli_distribution keep(density);
  std::vector<std::tuple<std::size_t, std::size_t, Word>> t;
  std::size_t others = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      if (r == hot) {
        t.emplace_back(r, c, random_value(rng));
      } else if (keep(rng) && static_cast<double>(others + 1) <= budget) {
        t.emplace_back(r, c, random_value(rng));
        ++others;
      }
    }
  }
  return csr_from_triplets(rows, cols, std::move(t));
}

}  // namespace nexus
