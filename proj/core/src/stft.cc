#include "unetaec/stft.h"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace unetaec {
namespace {

constexpr std::size_t kPaddedSamples = kFrameSamples + 2 * kEdgePad;
constexpr double kMinWindowSquareSum = 1e-8;

}  // namespace

std::vector<double> HannWindow(std::size_t length) {
  Require(length >= 2, "HannWindow: length must be at least 2");
  std::vector<double> w(length);
  const double step = 2.0 * std::numbers::pi / static_cast<double>(length);
  for (std::size_t n = 0; n < length; ++n) {
    w[n] = 0.5 * (1.0 - std::cos(step * static_cast<double>(n)));
  }
  return w;
}

StftProcessor::StftProcessor()
    : window_(HannWindow(kWindowSize)),
      norm_(kFrameSamples),
      padded_norm_(kPaddedSamples, 0.0),
      padded_(kPaddedSamples, 0.0),
      frame_(kWindowSize),
      spectrum_(kNumBins),
      fft_(kWindowSize) {
  for (std::size_t t = 0; t < kNumFrames; ++t) {
    for (std::size_t n = 0; n < kWindowSize; ++n) {
      padded_norm_[t * kHopSize + n] += window_[n] * window_[n];
    }
  }
  std::copy_n(padded_norm_.begin() + kEdgePad, kFrameSamples, norm_.begin());
}

void StftProcessor::Forward(std::span<const double> segment,
                            ComplexSpectrogram* out) {
  Require(segment.size() == kFrameSamples,
          "stft: segment must hold exactly 2560 samples");
  std::fill(padded_.begin(), padded_.end(), 0.0);
  std::copy(segment.begin(), segment.end(), padded_.begin() + kEdgePad);
  if (!out->HasStandardShape()) *out = ComplexSpectrogram{};
  for (std::size_t t = 0; t < kNumFrames; ++t) {
    const double* src = padded_.data() + t * kHopSize;
    for (std::size_t n = 0; n < kWindowSize; ++n) {
      frame_[n] = src[n] * window_[n];
    }
    fft_.Forward(frame_, spectrum_);
    for (std::size_t k = 0; k < kNumBins; ++k) out->bins(k, t) = spectrum_[k];
  }
}

void StftProcessor::Inverse(const ComplexSpectrogram& spec,
                            std::span<double> segment) {
  Require(spec.HasStandardShape(), "istft: spectrogram must be 160x32");
  Require(segment.size() == kFrameSamples,
          "istft: output must hold exactly 2560 samples");
  std::fill(padded_.begin(), padded_.end(), 0.0);
  for (std::size_t t = 0; t < kNumFrames; ++t) {
    for (std::size_t k = 0; k < kNumBins; ++k) spectrum_[k] = spec.bins(k, t);
    fft_.Inverse(spectrum_, frame_);
    double* dst = padded_.data() + t * kHopSize;
    for (std::size_t n = 0; n < kWindowSize; ++n) {
      dst[n] += frame_[n] * window_[n];
    }
  }
  for (std::size_t i = 0; i < kFrameSamples; ++i) {
    const double norm = norm_[i];
    segment[i] =
        norm < kMinWindowSquareSum ? 0.0 : padded_[i + kEdgePad] / norm;
  }
}

ComplexSpectrogram Stft(std::span<const double> segment) {
  StftProcessor processor;
  ComplexSpectrogram out;
  processor.Forward(segment, &out);
  return out;
}

std::vector<double> Istft(const ComplexSpectrogram& spec) {
  StftProcessor processor;
  std::vector<double> out(kFrameSamples);
  processor.Inverse(spec, out);
  return out;
}

MagnitudePhase SplitMagnitudePhase(const ComplexSpectrogram& spec) {
  const auto& bins = spec.bins;
  MagnitudePhase out{RealGrid(bins.bins(), bins.frames()),
                     RealGrid(bins.bins(), bins.frames())};
  auto src = bins.data();
  auto mag = out.magnitude.data();
  auto phase = out.phase.data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    Require(std::isfinite(src[i].real()) && std::isfinite(src[i].imag()),
            "magnitude_phase: non-finite entry");
    mag[i] = std::abs(src[i]);
    phase[i] = mag[i] == 0.0 ? 0.0 : std::arg(src[i]);
  }
  return out;
}

RealGrid Magnitude(const ComplexSpectrogram& spec) {
  RealGrid out(spec.bins.bins(), spec.bins.frames());
  auto src = spec.bins.data();
  auto mag = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) mag[i] = std::abs(src[i]);
  return out;
}

ComplexSpectrogram Recombine(const RealGrid& magnitude, const RealGrid& phase) {
  Require(magnitude.SameShape(phase), "recombine: shape mismatch");
  ComplexSpectrogram out;
  out.bins.Resize(magnitude.bins(), magnitude.frames());
  auto mag = magnitude.data();
  auto ph = phase.data();
  auto dst = out.bins.data();
  for (std::size_t i = 0; i < dst.size(); ++i) {
    dst[i] = {mag[i] * std::cos(ph[i]), mag[i] * std::sin(ph[i])};
  }
  return out;
}

}  // namespace unetaec
