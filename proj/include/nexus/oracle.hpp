// Copyright 2026 The Nexus Simulator Authors
// SPDX-License-Identifier: Apache-2.0

// Reference results computed directly from the tensors, in the same wrapping 16-bit
// arithmetic the ALU uses. Nothing here touches the simulator.

#pragma once

#include <cstdint>
#include <vector>

#include "nexus/csr.hpp"
#include "nexus/error.hpp"

namespace nexus::oracle {

inline Word mul(Word a, Word b) { return static_cast<Word>(static_cast<std::uint32_t>(a) * b); }
inline Word add(Word a, Word b) { return static_cast<Word>(a + b); }

// m x 1 result.
inline DenseMatrix spmv(const CsrMatrix& x, const std::vector<Word>& y) {
  if (y.size() != x.cols) throw Error(ErrorCode::kDimensionMismatch, "spmv: vector length != cols");
  DenseMatrix z(x.rows, 1);
  for (std::size_t r = 0; r < x.rows; ++r) {
    for (std::size_t k = x.rowptr[r]; k < x.rowptr[r + 1]; ++k) {
      z.at(r, 0) = add(z.at(r, 0), mul(x.vals[k], y[x.col[k]]));
    }
  }
  return z;
}

// Gustavson row-wise product.
inline DenseMatrix spmspm(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.cols != b.rows) throw Error(ErrorCode::kDimensionMismatch, "spmspm: inner dims differ");
  DenseMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t p = a.rowptr[i]; p < a.rowptr[i + 1]; ++p) {
      const std::size_t k = a.col[p];
      for (std::size_t q = b.rowptr[k]; q < b.rowptr[k + 1]; ++q) {
        c.at(i, b.col[q]) = add(c.at(i, b.col[q]), mul(a.vals[p], b.vals[q]));
      }
    }
  }
  return c;
}

inline DenseMatrix spadd(const CsrMatrix& a, const CsrMatrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw Error(ErrorCode::kDimensionMismatch, "spadd: dims differ");
  DenseMatrix c = to_dense(b);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t p = a.rowptr[i]; p < a.rowptr[i + 1]; ++p) {
      c.at(i, a.col[p]) = add(c.at(i, a.col[p]), a.vals[p]);
    }
  }
  return c;
}

// F = S .* (U V), evaluated only where S has entries.
inline DenseMatrix sddmm(const CsrMatrix& s, const DenseMatrix& u, const DenseMatrix& v) {
  if (u.rows != s.rows || v.cols != s.cols || u.cols != v.rows) {
    throw Error(ErrorCode::kDimensionMismatch, "sddmm: dims differ");
  }
  DenseMatrix f(s.rows, s.cols);
  for (std::size_t i = 0; i < s.rows; ++i) {
    for (std::size_t p = s.rowptr[i]; p < s.rowptr[i + 1]; ++p) {
      const std::size_t j = s.col[p];
      Word dot = 0;
      for (std::size_t t = 0; t < u.cols; ++t) dot = add(dot, mul(u.at(i, t), v.at(t, j)));
      f.at(i, j) = mul(s.vals[p], dot);
    }
  }
  return f;
}

inline DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols != b.rows) throw Error(ErrorCode::kDimensionMismatch, "matmul: inner dims differ");
  DenseMatrix c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    for (std::size_t j = 0; j < b.cols; ++j) {
      Word acc = 0;
      for (std::size_t t = 0; t < a.cols; ++t) acc = add(acc, mul(a.at(i, t), b.at(t, j)));
      c.at(i, j) = acc;
    }
  }
  return c;
}

}  // namespace nexus::oracle
