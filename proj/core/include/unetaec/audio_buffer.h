#ifndef UNETAEC_AUDIO_BUFFER_H_
#define UNETAEC_AUDIO_BUFFER_H_

#include <cmath>
#include <span>
#include <vector>

#include "unetaec/common.h"

namespace unetaec {

// Mono sample sequence. Samples are nominally in [-1, 1].
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = kSampleRateHz;

  AudioBuffer() = default;
  explicit AudioBuffer(std::vector<double> s, int rate = kSampleRateHz)
      : samples(std::move(s)), sample_rate(rate) {}

  std::size_t size() const { return samples.size(); }
  std::span<const double> view() const { return samples; }

  // Throws std::invalid_argument on a non-positive rate or non-finite sample.
  void Validate() const {
    Require(sample_rate > 0, "AudioBuffer: sample_rate must be positive");
    for (double v : samples) {
      Require(std::isfinite(v), "AudioBuffer: non-finite sample");
    }
  }
};

}  // namespace unetaec

#endif  // UNETAEC_AUDIO_BUFFER_H_
