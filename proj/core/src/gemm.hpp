#pragma once

#include <cstddef>

namespace rcm::detail {

// C[i][j] = sum_t A_i[t] * B_t[j] (or += when `accumulate`) for i < M, j < P, with A and B given as row pointers.
// Each output element sums its K products in increasing t order. `pack_b` copies B through an L1-sized buffer,
// worthwhile only when B is large and not already cache resident.
void gemm_rows(std::size_t m, std::size_t k, std::size_t p, const double* const* a_rows, const double* const* b_rows,
               double* c, std::size_t ldc, bool accumulate, bool pack_b = false);

// gemm_rows over row-major A[M][K] and B[K][P] with the given leading dimensions.
void gemm_rowmajor(std::size_t m, std::size_t k, std::size_t p, const double* a, std::size_t lda, const double* b,
                   std::size_t ldb, double* c, std::size_t ldc, bool accumulate);

}  // namespace rcm::detail
