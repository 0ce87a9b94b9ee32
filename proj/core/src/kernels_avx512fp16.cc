#include <immintrin.h>

#include "kernels.h"

namespace unetaec::kernels {
namespace {

constexpr std::size_t kTileRows = 8;
constexpr std::size_t kTileCols = 64;
// Half-precision partial sums are folded into fp32 after this many k-steps.
constexpr std::size_t kChunk = 64;

inline __mmask32 LaneMask32(std::size_t lanes) {
  return lanes >= 32 ? static_cast<__mmask32>(0xFFFFFFFFu)
                     : static_cast<__mmask32>((1u << lanes) - 1u);
}

inline __m512h LoadHalf(__mmask32 mask, const std::uint16_t* p) {
  return _mm512_castsi512_ph(_mm512_maskz_loadu_epi16(mask, p));
}

inline __m512 LowerToFloat(__m512h v) {
  return _mm512_cvtph_ps(_mm512_castsi512_si256(_mm512_castph_si512(v)));
}

inline __m512 UpperToFloat(__m512h v) {
  return _mm512_cvtph_ps(
      _mm512_extracti64x4_epi64(_mm512_castph_si512(v), 1));
}

template <std::size_t R>
inline void TileF16(std::size_t n, std::size_t k, const std::uint16_t* a,
                    const std::uint16_t* b, const float* bias, bool relu,
                    const std::uint16_t* residual, std::uint16_t* c,
                    std::size_t cols) {
  const __mmask32 m0 = LaneMask32(cols);
  const __mmask32 m1 = cols > 32 ? LaneMask32(cols - 32) : 0;
  // fp32 accumulators: R rows x 64 columns as 4 vectors of 16.
  __m512 wide[R][4];
  for (std::size_t r = 0; r < R; ++r) {
    const __m512 init = _mm512_set1_ps(bias ? bias[r] : 0.0f);
    for (int q = 0; q < 4; ++q) wide[r][q] = init;
  }
  for (std::size_t p0 = 0; p0 < k; p0 += kChunk) {
    const std::size_t p1 = p0 + kChunk < k ? p0 + kChunk : k;
    __m512h acc0[R];
    __m512h acc1[R];
    for (std::size_t r = 0; r < R; ++r) {
      acc0[r] = _mm512_setzero_ph();
      acc1[r] = _mm512_setzero_ph();
    }
    for (std::size_t p = p0; p < p1; ++p) {
      const std::uint16_t* row = b + p * n;
      const __m512h b0 = LoadHalf(m0, row);
      const __m512h b1 = LoadHalf(m1, row + 32);
      for (std::size_t r = 0; r < R; ++r) {
        const __m512h av = _mm512_castsi512_ph(
            _mm512_set1_epi16(static_cast<short>(a[r * k + p])));
        acc0[r] = _mm512_fmadd_ph(av, b0, acc0[r]);
        acc1[r] = _mm512_fmadd_ph(av, b1, acc1[r]);
      }
    }
    for (std::size_t r = 0; r < R; ++r) {
      wide[r][0] = _mm512_add_ps(wide[r][0], LowerToFloat(acc0[r]));
      wide[r][1] = _mm512_add_ps(wide[r][1], UpperToFloat(acc0[r]));
      wide[r][2] = _mm512_add_ps(wide[r][2], LowerToFloat(acc1[r]));
      wide[r][3] = _mm512_add_ps(wide[r][3], UpperToFloat(acc1[r]));
    }
  }
  const __m512 zero = _mm512_setzero_ps();
  for (std::size_t r = 0; r < R; ++r) {
    for (int q = 0; q < 4; ++q) {
      const std::size_t offset = static_cast<std::size_t>(q) * 16;
      if (offset >= cols) break;
      const std::size_t lanes = cols - offset;
      const __mmask16 mask = lanes >= 16
                                 ? static_cast<__mmask16>(0xFFFF)
                                 : static_cast<__mmask16>((1u << lanes) - 1u);
      __m512 v = wide[r][q];
      if (relu) v = _mm512_max_ps(v, zero);
      if (residual) {
        v = _mm512_add_ps(v, _mm512_cvtph_ps(_mm256_maskz_loadu_epi16(
                                 mask, residual + r * n + offset)));
      }
      _mm256_mask_storeu_epi16(c + r * n + offset, mask,
                               _mm512_cvtps_ph(v, _MM_FROUND_TO_NEAREST_INT));
    }
  }
}

}  // namespace

void GemmF16Avx512Fp16(std::size_t m, std::size_t n, std::size_t k,
                       const std::uint16_t* a, const std::uint16_t* b,
                       const float* bias, bool relu,
                       const std::uint16_t* residual, std::uint16_t* c) {
  for (std::size_t j = 0; j < n; j += kTileCols) {
    const std::size_t cols = n - j < kTileCols ? n - j : kTileCols;
    const std::uint16_t* res = residual ? residual + j : nullptr;
    std::size_t i = 0;
    for (; i + kTileRows <= m; i += kTileRows) {
      TileF16<kTileRows>(n, k, a + i * k, b + j, bias ? bias + i : nullptr,
                         relu, res ? res + i * n : nullptr, c + i * n + j,
                         cols);
    }
    for (; i < m; ++i) {
      TileF16<1>(n, k, a + i * k, b + j, bias ? bias + i : nullptr, relu,
                 res ? res + i * n : nullptr, c + i * n + j, cols);
    }
  }
}

}  // namespace unetaec::kernels
