// Copyright 2026 The groc-lm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "gemm.hpp"

#include <algorithm>
#include <vector>

namespace groc::detail {

namespace {

typedef double v8d __attribute__((vector_size(64)));
typedef double v8du __attribute__((vector_size(64), aligned(8)));

constexpr std::size_t kMr = 4;
constexpr std::size_t kNv = 3;
constexpr std::size_t kNr = 8 * kNv;
// Below this many rows, full column panels are read straight from B instead
// of being packed first.
constexpr std::size_t kPackRows = 16;

inline v8d load(const double* p) { return *reinterpret_cast<const v8du*>(p); }

// acc[r][v] accumulates rows a[r] against a [k, kNr] panel whose rows are
// `stride` doubles apart. Every lane is the same k-ordered FMA chain whatever
// Mr is, so row results do not depend on which kernel produced them.
// Packed panels are v8d aligned with stride kNr.
template <std::size_t Mr, bool Packed>
void micro_kernel(std::size_t k, const double* const* a, const double* panel, std::size_t stride,
                  double* out, std::size_t ldo) {
  v8d acc[Mr][kNv] = {};
  for (std::size_t p = 0; p < k; ++p) {
    v8d b[kNv];
    if constexpr (Packed) {
      const v8d* row = reinterpret_cast<const v8d*>(panel) + p * kNv;
      for (std::size_t v = 0; v < kNv; ++v) b[v] = row[v];
    } else {
      const double* row = panel + p * stride;
      for (std::size_t v = 0; v < kNv; ++v) b[v] = load(row + 8 * v);
    }
#pragma GCC unroll 4
    for (std::size_t r = 0; r < Mr; ++r) {
      const double s = a[r][p];
      const v8d av = {s, s, s, s, s, s, s, s};
#pragma GCC unroll 3
      for (std::size_t v = 0; v < kNv; ++v) acc[r][v] += av * b[v];
    }
  }
#pragma GCC unroll 4
  for (std::size_t r = 0; r < Mr; ++r) {
#pragma GCC unroll 3
    for (std::size_t v = 0; v < kNv; ++v) *reinterpret_cast<v8du*>(out + r * ldo + 8 * v) = acc[r][v];
  }
}

// Rows of C are written whole when the panel is full, otherwise through a
// kNr-wide scratch tile.
template <bool Packed>
void run_rows(std::size_t m, std::size_t k, const double* a, std::size_t lda, const double* panel,
              std::size_t stride, double* c, std::size_t ldc, std::size_t nj) {
  double tile[kMr * kNr];
  const bool full = nj == kNr;
  std::size_t i0 = 0;
  for (; i0 + kMr <= m; i0 += kMr) {
    const double* rows[kMr];
    for (std::size_t r = 0; r < kMr; ++r) rows[r] = a + (i0 + r) * lda;
    double* out = c + i0 * ldc;
    micro_kernel<kMr, Packed>(k, rows, panel, stride, full ? out : tile, full ? ldc : kNr);
    if (!full) {
      for (std::size_t r = 0; r < kMr; ++r) std::copy_n(tile + r * kNr, nj, out + r * ldc);
    }
  }
  for (; i0 < m; ++i0) {
    const double* rows[1] = {a + i0 * lda};
    double* out = c + i0 * ldc;
    micro_kernel<1, Packed>(k, rows, panel, stride, full ? out : tile, kNr);
    if (!full) std::copy_n(tile, nj, out);
  }
}

}  // namespace

void gemm_rows(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, bool b_transposed, double* c, std::size_t ldc) {
  if (m == 0 || n == 0) return;
  std::vector<v8d> storage(std::max<std::size_t>(k, 1) * kNv);
  double* panel = reinterpret_cast<double*>(storage.data());
  for (std::size_t j0 = 0; j0 < n; j0 += kNr) {
    const std::size_t nj = std::min(kNr, n - j0);
    if (!b_transposed && nj == kNr && m < kPackRows) {
      run_rows<false>(m, k, a, lda, b + j0, ldb, c + j0, ldc, nj);
      continue;
    }
    for (std::size_t p = 0; p < k; ++p) {
      double* dst = panel + p * kNr;
      for (std::size_t j = 0; j < nj; ++j) {
        dst[j] = b_transposed ? b[(j0 + j) * ldb + p] : b[p * ldb + j0 + j];
      }
      std::fill(dst + nj, dst + kNr, 0.0);
    }
    run_rows<true>(m, k, a, lda, panel, kNr, c + j0, ldc, nj);
  }
}

}  // namespace groc::detail
