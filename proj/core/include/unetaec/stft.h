#ifndef UNETAEC_STFT_H_
#define UNETAEC_STFT_H_

#include <complex>
#include <span>
#include <vector>

#include "unetaec/fft.h"
#include "unetaec/grid.h"

namespace unetaec {

// Periodic Hann window: w[n] = 0.5 * (1 - cos(2*pi*n / length)).
std::vector<double> HannWindow(std::size_t length);

// One-sided spectrogram of a 2560-sample segment: 160 bins x 32 frames.
struct ComplexSpectrogram {
  Grid<std::complex<double>> bins{kNumBins, kNumFrames};
  std::size_t window_size = kWindowSize;
  std::size_t hop = kHopSize;

  bool HasStandardShape() const {
    return bins.bins() == kNumBins && bins.frames() == kNumFrames &&
           window_size == kWindowSize && hop == kHopSize;
  }
};

// Analysis/synthesis pair for the fixed 2560-sample segment contract.
//
// The segment is zero padded by 119 samples on each side; frame t covers
// padded samples [80t, 80t + 318). Synthesis is weighted overlap-add with the
// analysis window, normalized by the per-sample sum of squared windows.
// Samples whose window-square sum falls below 1e-8 are set to 0.
//
// Holds its scratch buffers, so repeated calls do not allocate. Not safe for
// concurrent use; create one per thread.
class StftProcessor {
 public:
  StftProcessor();

  void Forward(std::span<const double> segment, ComplexSpectrogram* out);
  void Inverse(const ComplexSpectrogram& spec, std::span<double> segment);

  std::span<const double> window() const { return window_; }
  // Sum over frames of w^2 at each unpadded segment position.
  std::span<const double> window_square_sum() const { return norm_; }

 private:
  std::vector<double> window_;
  std::vector<double> norm_;         // kFrameSamples
  std::vector<double> padded_norm_;  // kFrameSamples + 2 * kEdgePad
  std::vector<double> padded_;
  std::vector<double> frame_;
  std::vector<std::complex<double>> spectrum_;
  RealFft fft_;
};

ComplexSpectrogram Stft(std::span<const double> segment);
std::vector<double> Istft(const ComplexSpectrogram& spec);

struct MagnitudePhase {
  RealGrid magnitude;
  RealGrid phase;
};

// Phase of a zero entry is defined as 0.
MagnitudePhase SplitMagnitudePhase(const ComplexSpectrogram& spec);
ComplexSpectrogram Recombine(const RealGrid& magnitude, const RealGrid& phase);
RealGrid Magnitude(const ComplexSpectrogram& spec);

}  // namespace unetaec

#endif  // UNETAEC_STFT_H_
