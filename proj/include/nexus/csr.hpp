// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "nexus/am.hpp"
#include "nexus/error.hpp"

namespace nexus {

// Round-to-nearest into signed 16 bits, stored as its two's-complement word.
inline Word quantize(double v) {
  const double r = std::nearbyint(v);
  const double clamped = std::clamp(r, -32768.0, 32767.0);
  return static_cast<Word>(static_cast<std::int16_t>(clamped));
}

struct CsrMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::size_t> rowptr{0};
  std::vector<std::uint32_t> col;
  std::vector<Word> vals;

  std::size_t nnz() const { return col.size(); }
  std::size_t row_nnz(std::size_t r) const { return rowptr[r + 1] - rowptr[r]; }

  std::size_t max_row_nnz() const {
    std::size_t best = 0;
    for (std::size_t r = 0; r < rows; ++r) best = std::max(best, row_nnz(r));
    return best;
  }

  // Value at (r, c), zero when absent.
  Word at(std::size_t r, std::size_t c) const {
    const auto first = col.begin() + static_cast<std::ptrdiff_t>(rowptr[r]);
    const auto last = col.begin() + static_cast<std::ptrdiff_t>(rowptr[r + 1]);
    const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(c));
    if (it == last || *it != c) return 0;
    return vals[static_cast<std::size_t>(it - col.begin())];
  }

  // Throws kInvalidInput when the CSR invariants do not hold.
  void validate() const {
    if (rowptr.size() != rows + 1 || rowptr.front() != 0 || rowptr.back() != col.size() ||
        vals.size() != col.size()) {
      throw Error(ErrorCode::kInvalidInput, "malformed CSR arrays");
    }
    for (std::size_t r = 0; r < rows; ++r) {
      if (rowptr[r] > rowptr[r + 1]) throw Error(ErrorCode::kInvalidInput, "rowptr decreases");
      for (std::size_t k = rowptr[r]; k < rowptr[r + 1]; ++k) {
        if (col[k] >= cols) throw Error(ErrorCode::kInvalidInput, "column index out of range");
        if (k > rowptr[r] && col[k] <= col[k - 1]) {
          throw Error(ErrorCode::kInvalidInput, "column indices not strictly increasing");
        }
      }
    }
  }

  friend bool operator==(const CsrMatrix&, const CsrMatrix&) = default;
};

// Builds a CSR matrix from unordered (row, col, value) triplets. Duplicates are summed
// with 16-bit wraparound; explicit zeros are kept so structure is preserved.
inline CsrMatrix csr_from_triplets(std::size_t rows, std::size_t cols,
                                   std::vector<std::tuple<std::size_t, std::size_t, Word>> t) {
  std::sort(t.begin(), t.end(), [](const auto& a, const auto& b) {
    return std::tie(std::get<0>(a), std::get<1>(a)) < std::tie(std::get<0>(b), std::get<1>(b));
  });
  CsrMatrix m;
  m.rows = rows;
  m.cols = cols;
  m.rowptr.assign(rows + 1, 0);
  std::size_t last_row = rows;
  for (const auto& [r, c, v] : t) {
    if (r >= rows || c >= cols) throw Error(ErrorCode::kInvalidInput, "triplet out of range");
    if (r == last_row && m.col.back() == c) {
      m.vals.back() = static_cast<Word>(m.vals.back() + v);
      continue;
    }
    m.col.push_back(static_cast<std::uint32_t>(c));
    m.vals.push_back(v);
    ++m.rowptr[r + 1];
    last_row = r;
  }
  for (std::size_t r = 0; r < rows; ++r) m.rowptr[r + 1] += m.rowptr[r];
  return m;
}

// Row-major dense matrix of 16-bit words.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Word> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0) {}

  Word& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  Word at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;
};

inline DenseMatrix to_dense(const CsrMatrix& m) {
  DenseMatrix d(m.rows, m.cols);
  for (std::size_t r = 0; r < m.rows; ++r) {
    for (std::size_t k = m.rowptr[r]; k < m.rowptr[r + 1]; ++k) d.at(r, m.col[k]) = m.vals[k];
  }
  return d;
}

// Every entry becomes a structural nonzero.
inline CsrMatrix to_csr_full(const DenseMatrix& d) {
  CsrMatrix m;
  m.rows = d.rows;
  m.cols = d.cols;
  m.rowptr.assign(d.rows + 1, 0);
  for (std::size_t r = 0; r < d.rows; ++r) {
    for (std::size_t c = 0; c < d.cols; ++c) {
      m.col.push_back(static_cast<std::uint32_t>(c));
      m.vals.push_back(d.at(r, c));
    }
    m.rowptr[r + 1] = m.col.size();
  }
  return m;
}

// Matrix Market coordinate reader. Supports real/integer/pattern fields and
// general/symmetric/skew-symmetric symmetry. Real values are quantized.
inline CsrMatrix read_matrix_market(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("%%MatrixMarket", 0) != 0) {
    throw Error(ErrorCode::kParse, "missing %%MatrixMarket banner");
  }
  std::istringstream banner(line);
  std::string tag, object, format, field, symmetry;
  banner >> tag >> object >> format >> field >> symmetry;
  auto lower = [](std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return s;
  };
  format = lower(format);
  field = lower(field);
  symmetry = lower(symmetry);
  if (lower(object) != "matrix" || format != "coordinate") {
    throw Error(ErrorCode::kParse, "only coordinate matrices are supported");
  }
  if (field == "complex") throw Error(ErrorCode::kParse, "complex fields are not supported");
  const bool pattern = field == "pattern";
  const bool symmetric = symmetry == "symmetric" || symmetry == "hermitian";
  const bool skew = symmetry == "skew-symmetric";

  while (std::getline(in, line)) {
    if (!line.empty() && line[0] != '%') break;
  }
  std::istringstream header(line);
  std::size_t rows = 0, cols = 0, entries = 0;
  if (!(header >> rows >> cols >> entries)) throw Error(ErrorCode::kParse, "bad size line");

  std::vector<std::tuple<std::size_t, std::size_t, Word>> triplets;
  triplets.reserve(entries * (symmetric || skew ? 2 : 1));
  for (std::size_t i = 0; i < entries; ++i) {
    std::size_t r = 0, c = 0;
    double v = 1.0;
    if (!(in >> r >> c)) throw Error(ErrorCode::kParse, "truncated entry list");
    if (!pattern && !(in >> v)) throw Error(ErrorCode::kParse, "missing value");
    if (r == 0 || c == 0 || r > rows || c > cols) throw Error(ErrorCode::kParse, "index out of range");
    const Word q = quantize(v);
    triplets.emplace_back(r - 1, c - 1, q);
    if ((symmetric || skew) && r != c) {
      triplets.emplace_back(c - 1, r - 1, skew ? static_cast<Word>(-q) : q);
    }
  }
  return csr_from_triplets(rows, cols, std::move(triplets));
}

inline CsrMatrix read_matrix_market(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kInvalidInput, "cannot open " + path);
  return read_matrix_market(in);
}

inline nlohmann::json to_json(const CsrMatrix& m) {
  return {{"rows", m.rows}, {"cols", m.cols}, {"rowptr", m.rowptr}, {"col", m.col}, {"vals", m.vals}};
}

}  // namespace nexus
