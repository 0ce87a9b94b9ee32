#include "unetaec/fp16.h"

#include <bit>
#include <cmath>

namespace unetaec {

std::uint16_t FloatToHalf(float value, bool* saturated) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(value);
  const std::uint16_t sign = static_cast<std::uint16_t>((bits >> 16) & 0x8000u);
  const std::uint32_t abs = bits & 0x7FFFFFFFu;

  if (abs > 0x7F800000u) return sign | 0x7E00u;  // NaN
  if (abs >= 0x477FF000u) {
    // |value| rounds above 65504 (or is infinite): saturate.
    if (saturated) *saturated = true;
    return sign | 0x7BFFu;
  }
  if (abs < 0x38800000u) {
    // Half subnormal range (or zero): value = m * 2^-24.
    if (abs < 0x33000000u) return sign;  // below 2^-25 rounds to zero
    const int exponent = static_cast<int>(abs >> 23);
    const std::uint32_t mantissa = (abs & 0x7FFFFFu) | 0x800000u;
    // value = mantissa * 2^(exponent - 150); half units are 2^-24.
    const int shift = 126 - exponent;
    std::uint32_t half = mantissa >> shift;
    const std::uint32_t remainder = mantissa & ((1u << shift) - 1u);
    const std::uint32_t halfway = 1u << (shift - 1);
    if (remainder > halfway || (remainder == halfway && (half & 1u))) ++half;
    return sign | static_cast<std::uint16_t>(half);
  }
  // Normal range: rebias exponent and round the mantissa to 10 bits.
  std::uint32_t half = ((abs >> 13) - ((127u - 15u) << 10));
  const std::uint32_t remainder = abs & 0x1FFFu;
  if (remainder > 0x1000u || (remainder == 0x1000u && (half & 1u))) ++half;
  return sign | static_cast<std::uint16_t>(half);
}

float HalfToFloat(std::uint16_t bits) {
  const std::uint32_t sign = static_cast<std::uint32_t>(bits & 0x8000u) << 16;
  const std::uint32_t exponent = (bits >> 10) & 0x1Fu;
  const std::uint32_t mantissa = bits & 0x3FFu;
  if (exponent == 0) {
    const float magnitude = std::ldexp(static_cast<float>(mantissa), -24);
    return sign ? -magnitude : magnitude;
  }
  if (exponent == 0x1F) {
    return std::bit_cast<float>(sign | 0x7F800000u | (mantissa << 13));
  }
  return std::bit_cast<float>(sign | ((exponent + 112u) << 23) |
                              (mantissa << 13));
}

}  // namespace unetaec
