#include "unetaec/metrics.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "unetaec/fft.h"
#include "unetaec/stft.h"

namespace unetaec {
namespace {

constexpr std::size_t kDistortionHop = 160;

double FrameMeanSquare(std::span<const double> signal, std::size_t frame) {
  double sum = 0.0;
  for (std::size_t i = 0; i < kStrideSamples; ++i) {
    const double v = signal[frame * kStrideSamples + i];
    sum += v * v;
  }
  return sum / static_cast<double>(kStrideSamples);
}

}  // namespace

std::size_t ActivityMask::count() const {
  return static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
}

ActivityMask ActivityMask::Inverted() const {
  ActivityMask out = *this;
  out.active.flip();
  return out;
}

ActivityMask ComputeActivityMask(std::span<const double> signal,
                                 double threshold_dbfs) {
  ActivityMask mask;
  mask.threshold_dbfs = threshold_dbfs;
  const std::size_t frames = signal.size() / kStrideSamples;
  mask.active.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    const double ms = FrameMeanSquare(signal, f);
    mask.active[f] = ms > 0.0 && 10.0 * std::log10(ms) > threshold_dbfs;
  }
  return mask;
}

double MeasureSer(std::span<const double> near, std::span<const double> echo,
                  double threshold_dbfs) {
  Require(near.size() == echo.size(), "ser: length mismatch");
  const ActivityMask mask = ComputeActivityMask(near, threshold_dbfs);
  double near_energy = 0.0;
  double echo_energy = 0.0;
  for (std::size_t f = 0; f < mask.size(); ++f) {
    if (!mask.active[f]) continue;
    for (std::size_t i = f * kStrideSamples; i < (f + 1) * kStrideSamples; ++i) {
      near_energy += near[i] * near[i];
      echo_energy += echo[i] * echo[i];
    }
  }
  Require(near_energy > 0.0, "ser: near-end signal has no active frame");
  Require(echo_energy > 0.0, "ser: echo is silent where the near end is active");
  return 10.0 * std::log10(near_energy / echo_energy);
}

double Erle(std::span<const double> mic, std::span<const double> estimate,
            const ActivityMask& selected) {
  Require(mic.size() == estimate.size(), "erle: length mismatch");
  Require(selected.size() <= mic.size() / kStrideSamples,
          "erle: mask longer than the signals");
  if (selected.count() == 0) {
    throw UndefinedError("erle: mask selects no frame");
  }
  double mic_energy = 0.0;
  double residual_energy = 0.0;
  for (std::size_t f = 0; f < selected.size(); ++f) {
    if (!selected.active[f]) continue;
    for (std::size_t i = f * kStrideSamples; i < (f + 1) * kStrideSamples; ++i) {
      mic_energy += mic[i] * mic[i];
      residual_energy += estimate[i] * estimate[i];
    }
  }
  if (residual_energy == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(mic_energy / residual_energy);
}

std::vector<std::vector<double>> LogSpectra(std::span<const double> signal) {
  const std::vector<double> window = HannWindow(kWindowSize);
  double window_sum = 0.0;
  for (double w : window) window_sum += w;

  const std::size_t frames =
      signal.size() <= kWindowSize
          ? 1
          : 1 + (signal.size() - kWindowSize) / kDistortionHop;
  RealFft fft(kWindowSize);
  std::vector<double> buffer(kWindowSize);
  std::vector<std::complex<double>> spectrum(fft.num_bins());
  std::vector<std::vector<double>> out(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    const std::size_t start = t * kDistortionHop;
    for (std::size_t n = 0; n < kWindowSize; ++n) {
      const std::size_t i = start + n;
      buffer[n] = i < signal.size() ? signal[i] * window[n] : 0.0;
    }
    fft.Forward(buffer, spectrum);
    out[t].resize(spectrum.size());
    for (std::size_t k = 0; k < spectrum.size(); ++k) {
      const double mag = std::abs(spectrum[k]) / window_sum;
      const double db = mag > 0.0 ? 20.0 * std::log10(mag) : kDistortionFloorDb;
      out[t][k] = std::max(db, kDistortionFloorDb);
    }
  }
  return out;
}

double SpectralDistortion(std::span<const double> estimate,
                          std::span<const double> reference) {
  Require(estimate.size() == reference.size(),
          "spectral distortion: length mismatch");
  const auto a = LogSpectra(estimate);
  const auto b = LogSpectra(reference);
  double total = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) {
    double sum = 0.0;
    for (std::size_t k = 0; k < a[t].size(); ++k) {
      const double d = a[t][k] - b[t][k];
      sum += d * d;
    }
    total += std::sqrt(sum / static_cast<double>(a[t].size()));
  }
  return total / static_cast<double>(a.size());
}

}  // namespace unetaec
