#include "unetaec/features.h"

#include <algorithm>
#include <cmath>

namespace unetaec {

FrameAssembler::FrameAssembler()
    : far_(kFrameSamples, 0.0), mic_(kFrameSamples, 0.0) {}

FrameAssembler::Frames FrameAssembler::PushStride(
    std::span<const double> far_block, std::span<const double> mic_block) {
  Require(far_block.size() == kStrideSamples &&
              mic_block.size() == kStrideSamples,
          "push_stride: blocks must hold exactly 640 samples");
  for (auto* history : {&far_, &mic_}) {
    std::copy(history->begin() + kStrideSamples, history->end(),
              history->begin());
  }
  std::copy(far_block.begin(), far_block.end(),
            far_.begin() + kHistorySamples);
  std::copy(mic_block.begin(), mic_block.end(),
            mic_.begin() + kHistorySamples);
  return {far_, mic_};
}

void FrameAssembler::Reset() {
  std::fill(far_.begin(), far_.end(), 0.0);
  std::fill(mic_.begin(), mic_.end(), 0.0);
}

void NormalizeInto(const RealGrid& magnitude, NormalizedFeature* out) {
  double peak = 0.0;
  for (double v : magnitude.data()) {
    Require(std::isfinite(v) && v >= 0.0,
            "normalize: entries must be finite and non-negative");
    peak = std::max(peak, v);
  }
  out->scale = std::max(peak, kNormalizationFloor);
  if (!out->grid.SameShape(magnitude)) {
    out->grid.Resize(magnitude.bins(), magnitude.frames());
  }
  auto src = magnitude.data();
  auto dst = out->grid.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] / out->scale;
}

NormalizedFeature Normalize(const RealGrid& magnitude) {
  NormalizedFeature out;
  NormalizeInto(magnitude, &out);
  return out;
}

RealGrid Denormalize(const NormalizedFeature& feature) {
  RealGrid out = feature.grid;
  for (double& v : out.data()) v *= feature.scale;
  return out;
}

Reconstructor::Reconstructor() : segment_(kFrameSamples) {}

void Reconstructor::Run(const RealGrid& normalized_estimate,
                        const RealGrid& mic_phase, double scale,
                        std::span<double> out) {
  Require(normalized_estimate.bins() == kNumBins &&
              normalized_estimate.frames() == kNumFrames &&
              normalized_estimate.SameShape(mic_phase),
          "reconstruct: grids must be 160x32");
  Require(out.size() == kStrideSamples,
          "reconstruct: output must hold 640 samples");
  auto mag = normalized_estimate.data();
  auto phase = mic_phase.data();
  auto dst = spec_.bins.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    const double m = mag[i] * scale;
    dst[i] = {m * std::cos(phase[i]), m * std::sin(phase[i])};
  }
  stft_.Inverse(spec_, segment_);
  std::copy(segment_.end() - kStrideSamples, segment_.end(), out.begin());
}

std::vector<double> Reconstruct(const RealGrid& normalized_estimate,
                                const RealGrid& mic_phase, double scale) {
  Reconstructor reconstructor;
  std::vector<double> out(kStrideSamples);
  reconstructor.Run(normalized_estimate, mic_phase, scale, out);
  return out;
}

}  // namespace unetaec
