#ifndef UNETAEC_GEMM_H_
#define UNETAEC_GEMM_H_

#include <cstddef>
#include <cstdint>

#include "unetaec/topology.h"

namespace unetaec {

// C[m x n] = act(A[m x k] * B[k x n] + bias[m]) + residual[m x n], all
// row-major. `bias` and `residual` may be null. Accumulation runs over k in
// ascending order, so results do not depend on how the work is tiled.
template <typename T>
void Gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b,
          const T* bias, Activation act, const T* residual, T* c);

// Half-precision variant: operands and result are IEEE binary16 bit
// patterns, bias is fp32. Products accumulate in half precision over runs of
// 64 k-steps, which are then summed in fp32. Uses AVX512-FP16 arithmetic when
// the CPU has it; otherwise operands are widened and the fp32 GEMM is used.
void GemmHalf(std::size_t m, std::size_t n, std::size_t k,
              const std::uint16_t* a, const std::uint16_t* b,
              const float* bias, Activation act,
              const std::uint16_t* residual, std::uint16_t* c);

// C[m x k] += A[m x n] * B[k x n]^T
template <typename T>
void GemmAccumulateABt(std::size_t m, std::size_t n, std::size_t k,
                       const T* a, const T* b, T* c);
// C[k x n] = A[m x k]^T * B[m x n]
template <typename T>
void GemmAtB(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c);

// Elementwise helpers over binary16 buffers.
void HalfToFloatBuffer(const std::uint16_t* in, std::size_t n, float* out);
void FloatToHalfBuffer(const float* in, std::size_t n, std::uint16_t* out);
// out[i] = max(in[2 * row], in[2 * row + 1]) over rows of `row_length`.
void MaxPoolRowsHalf(const std::uint16_t* in, std::size_t out_rows,
                     std::size_t row_length, std::uint16_t* out);

// Vector kernels in use. Disabling them forces the portable loops (used by
// tests to compare paths); it is a process-wide switch.
bool Avx512Available();
bool HalfArithmeticAvailable();
void SetSimdEnabled(bool enabled);
bool SimdEnabled();

}  // namespace unetaec

#endif  // UNETAEC_GEMM_H_
