#ifndef UNETAEC_COMMON_H_
#define UNETAEC_COMMON_H_

#include <cstddef>
#include <stdexcept>
#include <string>

namespace unetaec {

// Stream geometry. Everything downstream assumes 16 kHz mono audio.
inline constexpr int kSampleRateHz = 16000;
inline constexpr std::size_t kWindowSize = 318;
inline constexpr std::size_t kHopSize = 80;
inline constexpr std::size_t kNumBins = kWindowSize / 2 + 1;  // 160
inline constexpr std::size_t kFrameSamples = 2560;             // 160 ms
inline constexpr std::size_t kStrideSamples = 640;             // 40 ms
inline constexpr std::size_t kNumFrames = kFrameSamples / kHopSize;  // 32
inline constexpr std::size_t kEdgePad = (kWindowSize - kHopSize) / 2;  // 119
inline constexpr std::size_t kHistorySamples = kFrameSamples - kStrideSamples;
// Time frames of the spectrogram covered by the newest stride.
inline constexpr std::size_t kStrideFrames = kStrideSamples / kHopSize;  // 8

// Raised for malformed weight files and other on-disk format problems.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when a metric has no defined value for its input (e.g. an empty
// ERLE mask).
class UndefinedError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Throws std::invalid_argument with `message` unless `condition` holds.
inline void Require(bool condition, const std::string& message) {
  if (!condition) throw std::invalid_argument(message);
}

}  // namespace unetaec

#endif  // UNETAEC_COMMON_H_
