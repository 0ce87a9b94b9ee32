#ifndef UNETAEC_METRICS_H_
#define UNETAEC_METRICS_H_

#include <span>
#include <vector>

#include "unetaec/common.h"

namespace unetaec {

inline constexpr double kDefaultActivityThresholdDbfs = -40.0;
// Log-magnitude floor used by SpectralDistortion.
inline constexpr double kDistortionFloorDb = -80.0;

// Per 640-sample frame speech activity. A trailing partial frame is ignored.
struct ActivityMask {
  std::vector<bool> active;
  double threshold_dbfs = kDefaultActivityThresholdDbfs;

  std::size_t size() const { return active.size(); }
  std::size_t count() const;
  ActivityMask Inverted() const;
};

// Frame is active iff 10*log10(mean square) > threshold. Silent frames are
// inactive whatever the threshold.
ActivityMask ComputeActivityMask(std::span<const double> signal,
                                 double threshold_dbfs = kDefaultActivityThresholdDbfs);

// Signal-to-echo ratio (dB) over the frames where `near` is active.
// Throws std::invalid_argument if there is no such frame or the echo is
// silent there.
double MeasureSer(std::span<const double> near, std::span<const double> echo,
                  double threshold_dbfs = kDefaultActivityThresholdDbfs);

// 10*log10(sum y^2 / sum s_hat^2) over the selected 640-sample frames.
// Returns +infinity when the residual energy is zero. Throws UndefinedError
// when no frame is selected and std::invalid_argument on length mismatch.
double Erle(std::span<const double> mic, std::span<const double> estimate,
            const ActivityMask& selected);

// Mean over frames of the RMS difference (dB) between log-magnitude spectra,
// each floored at -80 dB. Frames are 318-sample Hann windows every 160
// samples; magnitudes are scaled by the window sum so a full-scale sinusoid
// peaks near -6 dB. Zero iff the floored spectra agree.
double SpectralDistortion(std::span<const double> estimate,
                          std::span<const double> reference);

// Floored log-magnitude spectra used by SpectralDistortion, frame-major.
std::vector<std::vector<double>> LogSpectra(std::span<const double> signal);

}  // namespace unetaec

#endif  // UNETAEC_METRICS_H_
