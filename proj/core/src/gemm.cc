#include "unetaec/gemm.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <type_traits>
#include <vector>

#include "kernels.h"
#include "unetaec/fp16.h"

#if defined(__x86_64__) || defined(__i386__)
#include <cpuid.h>
#define UNETAEC_X86 1
#endif

namespace unetaec {
namespace {

struct CpuFeatures {
  bool avx512 = false;       // F + BW + VL + F16C, with OS zmm support
  bool avx512_fp16 = false;  // additionally AVX512-FP16
};

#ifdef UNETAEC_X86
std::uint64_t ReadXcr0() {
  std::uint32_t eax = 0;
  std::uint32_t edx = 0;
  __asm__ volatile("xgetbv" : "=a"(eax), "=d"(edx) : "c"(0));
  return (static_cast<std::uint64_t>(edx) << 32) | eax;
}
#endif

CpuFeatures DetectCpu() {
  CpuFeatures features;
#if defined(UNETAEC_X86) && defined(UNETAEC_HAVE_AVX512_KERNELS)
  unsigned eax = 0, ebx = 0, ecx = 0, edx = 0;
  if (!__get_cpuid(1, &eax, &ebx, &ecx, &edx)) return features;
  const bool osxsave = (ecx >> 27) & 1u;
  const bool f16c = (ecx >> 29) & 1u;
  const bool fma = (ecx >> 12) & 1u;
  if (!osxsave || !f16c || !fma) return features;
  // XMM, YMM, opmask and both halves of the ZMM state must be enabled.
  if ((ReadXcr0() & 0xE6u) != 0xE6u) return features;
  if (!__get_cpuid_count(7, 0, &eax, &ebx, &ecx, &edx)) return features;
  const bool avx512f = (ebx >> 16) & 1u;
  const bool avx512bw = (ebx >> 30) & 1u;
  const bool avx512vl = (ebx >> 31) & 1u;
  features.avx512 = avx512f && avx512bw && avx512vl;
#ifdef UNETAEC_HAVE_FP16_KERNELS
  features.avx512_fp16 = features.avx512 && ((edx >> 23) & 1u);
#endif
#endif
  return features;
}

const CpuFeatures& Cpu() {
  static const CpuFeatures features = DetectCpu();
  return features;
}

std::atomic<bool> g_simd_enabled{true};

bool UseAvx512() { return g_simd_enabled.load() && Cpu().avx512; }
#ifdef UNETAEC_HAVE_FP16_KERNELS
bool UseFp16() { return g_simd_enabled.load() && Cpu().avx512_fp16; }
#endif

template <typename T>
void GemmPortable(std::size_t m, std::size_t n, std::size_t k, const T* a,
                  const T* b, const T* bias, Activation act,
                  const T* residual, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    T* row = c + i * n;
    std::fill(row, row + n, bias ? bias[i] : T{});
    const T* a_row = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a_row[p];
      const T* b_row = b + p * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += av * b_row[j];
    }
    if (act == Activation::kRelu) {
      for (std::size_t j = 0; j < n; ++j) row[j] = std::max(row[j], T{});
    }
    if (residual) {
      const T* r = residual + i * n;
      for (std::size_t j = 0; j < n; ++j) row[j] += r[j];
    }
  }
}

}  // namespace

template <typename T>
void Gemm(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b,
          const T* bias, Activation act, const T* residual, T* c) {
#ifdef UNETAEC_HAVE_AVX512_KERNELS
  if constexpr (std::is_same_v<T, float>) {
    if (UseAvx512()) {
      kernels::GemmF32Avx512(m, n, k, a, b, bias, act == Activation::kRelu,
                             residual, c);
      return;
    }
  }
#endif
  GemmPortable(m, n, k, a, b, bias, act, residual, c);
}

template void Gemm(std::size_t, std::size_t, std::size_t, const float*,
                   const float*, const float*, Activation, const float*,
                   float*);
template void Gemm(std::size_t, std::size_t, std::size_t, const double*,
                   const double*, const double*, Activation, const double*,
                   double*);

void HalfToFloatBuffer(const std::uint16_t* in, std::size_t n, float* out) {
#ifdef UNETAEC_HAVE_AVX512_KERNELS
  if (UseAvx512()) {
    kernels::HalfToFloatAvx512(in, n, out);
    return;
  }
#endif
  for (std::size_t i = 0; i < n; ++i) out[i] = HalfToFloat(in[i]);
}

void FloatToHalfBuffer(const float* in, std::size_t n, std::uint16_t* out) {
#ifdef UNETAEC_HAVE_AVX512_KERNELS
  if (UseAvx512()) {
    kernels::FloatToHalfAvx512(in, n, out);
    return;
  }
#endif
  // Activations are not saturated: overflow becomes infinity, as in hardware.
  for (std::size_t i = 0; i < n; ++i) {
    const float v = in[i];
    out[i] = std::abs(v) >= 65520.0f && std::isfinite(v)
                 ? static_cast<std::uint16_t>(v < 0 ? 0xFC00u : 0x7C00u)
                 : FloatToHalf(v);
  }
}

void MaxPoolRowsHalf(const std::uint16_t* in, std::size_t out_rows,
                     std::size_t row_length, std::uint16_t* out) {
#ifdef UNETAEC_HAVE_AVX512_KERNELS
  if (UseAvx512()) {
    kernels::MaxPoolRowsHalfAvx512(in, out_rows, row_length, out);
    return;
  }
#endif
  for (std::size_t r = 0; r < out_rows; ++r) {
    const std::uint16_t* top = in + 2 * r * row_length;
    const std::uint16_t* bottom = top + row_length;
    for (std::size_t i = 0; i < row_length; ++i) {
      out[r * row_length + i] =
          HalfToFloat(top[i]) >= HalfToFloat(bottom[i]) ? top[i] : bottom[i];
    }
  }
}

void GemmHalf(std::size_t m, std::size_t n, std::size_t k,
              const std::uint16_t* a, const std::uint16_t* b,
              const float* bias, Activation act,
              const std::uint16_t* residual, std::uint16_t* c) {
#ifdef UNETAEC_HAVE_FP16_KERNELS
  if (UseFp16()) {
    kernels::GemmF16Avx512Fp16(m, n, k, a, b, bias, act == Activation::kRelu,
                               residual, c);
    return;
  }
#endif
  thread_local std::vector<float> wide_a, wide_b, wide_r, wide_c;
  wide_a.resize(m * k);
  wide_b.resize(k * n);
  wide_c.resize(m * n);
  HalfToFloatBuffer(a, m * k, wide_a.data());
  HalfToFloatBuffer(b, k * n, wide_b.data());
  const float* res = nullptr;
  if (residual) {
    wide_r.resize(m * n);
    HalfToFloatBuffer(residual, m * n, wide_r.data());
    res = wide_r.data();
  }
  Gemm<float>(m, n, k, wide_a.data(), wide_b.data(), bias, act, res,
              wide_c.data());
  FloatToHalfBuffer(wide_c.data(), m * n, c);
}

template <typename T>
void GemmAccumulateABt(std::size_t m, std::size_t n, std::size_t k,
                       const T* a, const T* b, T* c) {
  for (std::size_t i = 0; i < m; ++i) {
    const T* a_row = a + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T* b_row = b + p * n;
      T sum{};
      for (std::size_t j = 0; j < n; ++j) sum += a_row[j] * b_row[j];
      c[i * k + p] += sum;
    }
  }
}

template <typename T>
void GemmAtB(std::size_t m, std::size_t n, std::size_t k, const T* a,
             const T* b, T* c) {
  std::fill(c, c + k * n, T{});
  for (std::size_t i = 0; i < m; ++i) {
    const T* b_row = b + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      T* c_row = c + p * n;
      for (std::size_t j = 0; j < n; ++j) c_row[j] += av * b_row[j];
    }
  }
}

template void GemmAccumulateABt(std::size_t, std::size_t, std::size_t,
                                const float*, const float*, float*);
template void GemmAccumulateABt(std::size_t, std::size_t, std::size_t,
                                const double*, const double*, double*);
template void GemmAtB(std::size_t, std::size_t, std::size_t, const float*,
                      const float*, float*);
template void GemmAtB(std::size_t, std::size_t, std::size_t, const double*,
                      const double*, double*);

bool Avx512Available() { return Cpu().avx512; }
bool HalfArithmeticAvailable() { return Cpu().avx512_fp16; }
void SetSimdEnabled(bool enabled) { g_simd_enabled.store(enabled); }
bool SimdEnabled() { return g_simd_enabled.load(); }

}  // namespace unetaec
