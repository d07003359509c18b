// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace dsan::detail {

// Row-major C[M x N] = alpha * op(A) * op(B) + beta * C, where op(A) is
// M x K and op(B) is K x N. Single-threaded and deterministic: the
// accumulation order depends only on the problem size.
template <typename T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, T alpha,
          const T* a, std::size_t lda, const T* b, std::size_t ldb, T beta, T* c,
          std::size_t ldc);

} // namespace dsan::detail
