#ifndef UNETAEC_SRC_KERNELS_H_
#define UNETAEC_SRC_KERNELS_H_

// Vector kernels built in their own translation units with target-specific
// flags. Only call them after the matching CPU feature check. These files
// must not instantiate standard library templates, so no inline function
// compiled with AVX-512 enabled can leak into portable code at link time.

#include <cstddef>
#include <cstdint>

namespace unetaec::kernels {

void GemmF32Avx512(std::size_t m, std::size_t n, std::size_t k, const float* a,
                   const float* b, const float* bias, bool relu,
                   const float* residual, float* c);

void HalfToFloatAvx512(const std::uint16_t* in, std::size_t n, float* out);
void FloatToHalfAvx512(const float* in, std::size_t n, std::uint16_t* out);
void MaxPoolRowsHalfAvx512(const std::uint16_t* in, std::size_t out_rows,
                           std::size_t row_length, std::uint16_t* out);

void GemmF16Avx512Fp16(std::size_t m, std::size_t n, std::size_t k,
                       const std::uint16_t* a, const std::uint16_t* b,
                       const float* bias, bool relu,
                       const std::uint16_t* residual, std::uint16_t* c);

}  // namespace unetaec::kernels

#endif  // UNETAEC_SRC_KERNELS_H_
