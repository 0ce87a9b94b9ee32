#ifndef UNETAEC_FP16_H_
#define UNETAEC_FP16_H_

#include <cstdint>

namespace unetaec {

inline constexpr float kHalfMax = 65504.0f;

// IEEE binary16 conversion with round-to-nearest-even. Subnormal halves are
// kept; magnitudes below 2^-25 round to (signed) zero. Finite values beyond
// the half range saturate to +-65504 and set *saturated when provided. NaN
// maps to a quiet NaN.
std::uint16_t FloatToHalf(float value, bool* saturated = nullptr);
float HalfToFloat(std::uint16_t bits);

// Rounds through half precision and back.
inline float RoundToHalf(float value, bool* saturated = nullptr) {
  return HalfToFloat(FloatToHalf(value, saturated));
}

}  // namespace unetaec

#endif  // UNETAEC_FP16_H_
