#include "gemm.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "rcm/tensor.hpp"

#if defined(__AVX512F__)
#include <immintrin.h>
#endif

namespace rcm::detail {
namespace {

constexpr std::size_t kBlock = 32;
constexpr std::size_t kPackThreshold = 128 * 1024;

#if defined(__AVX512F__)

// MR rows of C by NV vectors of 8 columns starting at column j; the last vector is masked by `mask`.
template <int MR, int NV>
inline void tile(std::size_t k, const double* const* a, const double* const* b, std::size_t j, double* c,
                 std::size_t ldc, bool accumulate, __mmask8 mask) {
  __m512d acc[MR][NV];
#pragma GCC unroll 8
  for (int i = 0; i < MR; ++i)
#pragma GCC unroll 4
    for (int v = 0; v < NV; ++v) {
      const __mmask8 m = v == NV - 1 ? mask : __mmask8(0xFF);
      acc[i][v] = accumulate ? _mm512_maskz_loadu_pd(m, c + i * ldc + 8 * v) : _mm512_setzero_pd();
    }
  const double* ar[MR];
#pragma GCC unroll 8
  for (int i = 0; i < MR; ++i) ar[i] = a[i];
  for (std::size_t t = 0; t < k; ++t) {
    const double* bt = b[t] + j;
    __m512d bv[NV];
#pragma GCC unroll 4
    for (int v = 0; v < NV; ++v) {
      const __mmask8 m = v == NV - 1 ? mask : __mmask8(0xFF);
      bv[v] = _mm512_maskz_loadu_pd(m, bt + 8 * v);
    }
#pragma GCC unroll 8
    for (int i = 0; i < MR; ++i) {
      const __m512d av = _mm512_set1_pd(ar[i][t]);
#pragma GCC unroll 4
      for (int v = 0; v < NV; ++v) acc[i][v] = _mm512_fmadd_pd(av, bv[v], acc[i][v]);
    }
  }
#pragma GCC unroll 8
  for (int i = 0; i < MR; ++i)
#pragma GCC unroll 4
    for (int v = 0; v < NV; ++v) {
      const __mmask8 m = v == NV - 1 ? mask : __mmask8(0xFF);
      _mm512_mask_storeu_pd(c + i * ldc + 8 * v, m, acc[i][v]);
    }
}

// All rows of A against NV vectors of B starting at column j, in row panels of near-equal height.
template <int NV>
void column_block(std::size_t m, std::size_t k, const double* const* a, const double* const* b, std::size_t j,
                  double* c, std::size_t ldc, bool accumulate, __mmask8 mask) {
  const std::size_t panels = (m + 5) / 6;
  for (std::size_t q = 0, i = 0; q < panels; ++q) {
    const std::size_t rows = m / panels + (q < m % panels ? 1 : 0);
    double* ci = c + i * ldc + j;
    switch (rows) {
      case 6: tile<6, NV>(k, a + i, b, j, ci, ldc, accumulate, mask); break;
      case 5: tile<5, NV>(k, a + i, b, j, ci, ldc, accumulate, mask); break;
      case 4: tile<4, NV>(k, a + i, b, j, ci, ldc, accumulate, mask); break;
      case 3: tile<3, NV>(k, a + i, b, j, ci, ldc, accumulate, mask); break;
      case 2: tile<2, NV>(k, a + i, b, j, ci, ldc, accumulate, mask); break;
      default: tile<1, NV>(k, a + i, b, j, ci, ldc, accumulate, mask); break;
    }
    i += rows;
  }
}

void block(std::size_t m, std::size_t k, std::size_t w, const double* const* a, const double* const* b,
           std::size_t j, double* c, std::size_t ldc, bool accumulate) {
  const auto mask = static_cast<__mmask8>(w % 8 == 0 ? 0xFFu : (1u << (w % 8)) - 1u);
  switch ((w + 7) / 8) {
    case 4: column_block<4>(m, k, a, b, j, c, ldc, accumulate, mask); break;
    case 3: column_block<3>(m, k, a, b, j, c, ldc, accumulate, mask); break;
    case 2: column_block<2>(m, k, a, b, j, c, ldc, accumulate, mask); break;
    default: column_block<1>(m, k, a, b, j, c, ldc, accumulate, mask); break;
  }
}

#else

void block(std::size_t m, std::size_t k, std::size_t w, const double* const* a, const double* const* b,
           std::size_t j, double* c, std::size_t ldc, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i) {
    double* crow = c + i * ldc + j;
    if (!accumulate) std::fill(crow, crow + w, 0.0);
    for (std::size_t t = 0; t < k; ++t) {
      const double av = a[i][t];
      const double* brow = b[t] + j;
      for (std::size_t q = 0; q < w; ++q) crow[q] = std::fma(av, brow[q], crow[q]);
    }
  }
}

#endif

}  // namespace

void gemm_rows(std::size_t m, std::size_t k, std::size_t p, const double* const* a_rows, const double* const* b_rows,
               double* c, std::size_t ldc, bool accumulate, bool pack_b) {
  if (!pack_b || m <= 6) {
    for (std::size_t j = 0; j < p; j += kBlock)
      block(m, k, std::min(kBlock, p - j), a_rows, b_rows, j, c, ldc, accumulate);
    return;
  }
  thread_local std::vector<double, AlignedAllocator<double>> packed;
  thread_local std::vector<const double*> packed_rows;
  if (packed.size() < k * kBlock) packed.resize(k * kBlock);
  packed_rows.resize(k);
  for (std::size_t t = 0; t < k; ++t) packed_rows[t] = packed.data() + t * kBlock;
  for (std::size_t j = 0; j < p; j += kBlock) {
    const std::size_t w = std::min(kBlock, p - j);
    for (std::size_t t = 0; t < k; ++t) std::copy(b_rows[t] + j, b_rows[t] + j + w, packed.data() + t * kBlock);
    block(m, k, w, a_rows, packed_rows.data(), 0, c + j, ldc, accumulate);
  }
}

void gemm_rowmajor(std::size_t m, std::size_t k, std::size_t p, const double* a, std::size_t lda, const double* b,
                   std::size_t ldb, double* c, std::size_t ldc, bool accumulate) {
  std::vector<const double*> a_rows(m), b_rows(k);
  for (std::size_t i = 0; i < m; ++i) a_rows[i] = a + i * lda;
  for (std::size_t t = 0; t < k; ++t) b_rows[t] = b + t * ldb;
  // A B too large for L2 is copied 32 columns at a time so every row panel reads it from L1.
  gemm_rows(m, k, p, a_rows.data(), b_rows.data(), c, ldc, accumulate, k * ldb >= kPackThreshold);
}

}  // namespace rcm::detail
