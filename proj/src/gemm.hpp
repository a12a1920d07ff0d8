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

#ifndef GROC_SRC_GEMM_HPP
#define GROC_SRC_GEMM_HPP

#include <cstddef>

namespace groc::detail {

// C[m,n] = A[m,k] * op(B), where op(B) is B[k,n] (ldb = row stride) or, when
// `b_transposed`, the transpose of B[n,k]. Rows of A are `lda` apart, which
// may be less than k for overlapping windows.
//
// Every C(i,j) is one fused multiply-add chain over k in increasing order,
// so a row's result does not depend on m, n or where the row sits in A.
void gemm_rows(std::size_t m, std::size_t n, std::size_t k, const double* a, std::size_t lda,
               const double* b, std::size_t ldb, bool b_transposed, double* c, std::size_t ldc);

}  // namespace groc::detail

#endif  // GROC_SRC_GEMM_HPP
