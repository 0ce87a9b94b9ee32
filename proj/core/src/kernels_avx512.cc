#include <immintrin.h>

#include "kernels.h"

namespace unetaec::kernels {
namespace {

constexpr std::size_t kTileRows = 8;
constexpr std::size_t kTileCols = 32;

inline __mmask16 LaneMask(std::size_t lanes) {
  return lanes >= 16 ? static_cast<__mmask16>(0xFFFF)
                     : static_cast<__mmask16>((1u << lanes) - 1u);
}

template <std::size_t R>
inline void TileF32(std::size_t n, std::size_t k, const float* a,
                    const float* b, const float* bias, bool relu,
                    const float* residual, float* c, __mmask16 m0,
                    __mmask16 m1) {
  __m512 acc0[R];
  __m512 acc1[R];
  for (std::size_t r = 0; r < R; ++r) {
    const float init = bias ? bias[r] : 0.0f;
    acc0[r] = _mm512_set1_ps(init);
    acc1[r] = acc0[r];
  }
  for (std::size_t p = 0; p < k; ++p) {
    const float* row = b + p * n;
    const __m512 b0 = _mm512_maskz_loadu_ps(m0, row);
    const __m512 b1 = _mm512_maskz_loadu_ps(m1, row + 16);
    for (std::size_t r = 0; r < R; ++r) {
      const __m512 av = _mm512_set1_ps(a[r * k + p]);
      acc0[r] = _mm512_fmadd_ps(av, b0, acc0[r]);
      acc1[r] = _mm512_fmadd_ps(av, b1, acc1[r]);
    }
  }
  const __m512 zero = _mm512_setzero_ps();
  for (std::size_t r = 0; r < R; ++r) {
    if (relu) {
      acc0[r] = _mm512_max_ps(acc0[r], zero);
      acc1[r] = _mm512_max_ps(acc1[r], zero);
    }
    if (residual) {
      acc0[r] = _mm512_add_ps(
          acc0[r], _mm512_maskz_loadu_ps(m0, residual + r * n));
      acc1[r] = _mm512_add_ps(
          acc1[r], _mm512_maskz_loadu_ps(m1, residual + r * n + 16));
    }
    _mm512_mask_storeu_ps(c + r * n, m0, acc0[r]);
    _mm512_mask_storeu_ps(c + r * n + 16, m1, acc1[r]);
  }
}

}  // namespace

void GemmF32Avx512(std::size_t m, std::size_t n, std::size_t k, const float* a,
                   const float* b, const float* bias, bool relu,
                   const float* residual, float* c) {
  for (std::size_t j = 0; j < n; j += kTileCols) {
    const std::size_t cols = n - j < kTileCols ? n - j : kTileCols;
    const __mmask16 m0 = LaneMask(cols);
    const __mmask16 m1 = cols > 16 ? LaneMask(cols - 16) : 0;
    const float* res = residual ? residual + j : nullptr;
    std::size_t i = 0;
    for (; i + kTileRows <= m; i += kTileRows) {
      TileF32<kTileRows>(n, k, a + i * k, b + j, bias ? bias + i : nullptr,
                         relu, res ? res + i * n : nullptr, c + i * n + j, m0,
                         m1);
    }
    for (; i < m; ++i) {
      TileF32<1>(n, k, a + i * k, b + j, bias ? bias + i : nullptr, relu,
                 res ? res + i * n : nullptr, c + i * n + j, m0, m1);
    }
  }
}

void HalfToFloatAvx512(const std::uint16_t* in, std::size_t n, float* out) {
  for (std::size_t i = 0; i < n; i += 16) {
    const __mmask16 mask = LaneMask(n - i);
    const __m256i h = _mm256_maskz_loadu_epi16(mask, in + i);
    _mm512_mask_storeu_ps(out + i, mask, _mm512_cvtph_ps(h));
  }
}

void FloatToHalfAvx512(const float* in, std::size_t n, std::uint16_t* out) {
  for (std::size_t i = 0; i < n; i += 16) {
    const __mmask16 mask = LaneMask(n - i);
    const __m512 v = _mm512_maskz_loadu_ps(mask, in + i);
    const __m256i h = _mm512_cvtps_ph(v, _MM_FROUND_TO_NEAREST_INT);
    _mm256_mask_storeu_epi16(out + i, mask, h);
  }
}

void MaxPoolRowsHalfAvx512(const std::uint16_t* in, std::size_t out_rows,
                           std::size_t row_length, std::uint16_t* out) {
  for (std::size_t r = 0; r < out_rows; ++r) {
    const std::uint16_t* top = in + 2 * r * row_length;
    const std::uint16_t* bottom = top + row_length;
    std::uint16_t* dst = out + r * row_length;
    for (std::size_t i = 0; i < row_length; i += 16) {
      const __mmask16 mask = LaneMask(row_length - i);
      const __m512 x = _mm512_cvtph_ps(_mm256_maskz_loadu_epi16(mask, top + i));
      const __m512 y =
          _mm512_cvtph_ps(_mm256_maskz_loadu_epi16(mask, bottom + i));
      // Conversion back is exact: the max is one of the inputs.
      const __m256i h =
          _mm512_cvtps_ph(_mm512_max_ps(x, y), _MM_FROUND_TO_NEAREST_INT);
      _mm256_mask_storeu_epi16(dst + i, mask, h);
    }
  }
}

}  // namespace unetaec::kernels
