#ifndef UNETAEC_FEATURES_H_
#define UNETAEC_FEATURES_H_

#include <array>
#include <span>
#include <vector>

#include "unetaec/grid.h"
#include "unetaec/stft.h"

namespace unetaec {

// Keeps the last 2560 samples of the far-end and microphone streams. Each
// push of a 640-sample stride exposes the newest 160 ms of both. History
// starts as zeros.
class FrameAssembler {
 public:
  FrameAssembler();

  struct Frames {
    std::span<const double> far_end;
    std::span<const double> mic;
  };

  // Returned spans stay valid until the next PushStride or Reset.
  Frames PushStride(std::span<const double> far_block,
                    std::span<const double> mic_block);
  void Reset();

 private:
  std::vector<double> far_;
  std::vector<double> mic_;
};

inline constexpr double kNormalizationFloor = 1e-8;

// Magnitude grid divided by its own maximum (floored at 1e-8).
struct NormalizedFeature {
  RealGrid grid;
  double scale = kNormalizationFloor;
};

NormalizedFeature Normalize(const RealGrid& magnitude);
// In-place variant used on the streaming path.
void NormalizeInto(const RealGrid& magnitude, NormalizedFeature* out);
RealGrid Denormalize(const NormalizedFeature& feature);

// Rebuilds the newest 640 samples from a normalized near-end magnitude
// estimate, the microphone phase and the microphone normalization scale.
class Reconstructor {
 public:
  Reconstructor();
  void Run(const RealGrid& normalized_estimate, const RealGrid& mic_phase,
           double scale, std::span<double> out);

 private:
  StftProcessor stft_;
  ComplexSpectrogram spec_;
  std::vector<double> segment_;
};

std::vector<double> Reconstruct(const RealGrid& normalized_estimate,
                                const RealGrid& mic_phase, double scale);

}  // namespace unetaec

#endif  // UNETAEC_FEATURES_H_
