#ifndef UNETAEC_PFB_LMS_H_
#define UNETAEC_PFB_LMS_H_

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "unetaec/fft.h"

namespace unetaec {

struct PfbLmsConfig {
  std::size_t num_taps = 4000;
  std::size_t block_size = 1024;
  double mu = 1e-4;
  // Per-bin power smoothing factor and regularizer of the normalized step.
  double power_smoothing = 0.9;
  double regularization = 1e-6;
  // Consecutive blocks with err energy above mic energy before mu halves.
  std::size_t divergence_window = 8;
};

// Partitioned frequency-block NLMS echo canceler (overlap-save, gradient
// constrained). A filter of num_taps coefficients is split into
// ceil(num_taps / B) partitions of B taps, each adapted with an FFT of size
// 2B. The step for bin k is mu / (P_k + regularization), where P_k is the
// far-end power in bin k summed over the spectra of all partitions, smoothed
// with `power_smoothing` but never below its current value. This makes mu a
// normalized step: adaptation is stable for 0 < mu < 2.
class PfbLms {
 public:
  explicit PfbLms(const PfbLmsConfig& config = {});

  std::size_t block_size() const { return block_; }
  std::size_t num_partitions() const { return partitions_.size(); }
  double mu() const { return mu_; }
  std::size_t halvings() const { return halvings_; }

  // Filters one block of far-end samples, subtracts the echo estimate from
  // the microphone block and adapts. Returns the error block (the near-end
  // estimate). A mu of 0 freezes adaptation.
  void ProcessBlock(std::span<const double> far_block,
                    std::span<const double> mic_block,
                    std::span<double> err_block);
  std::vector<double> ProcessBlock(std::span<const double> far_block,
                                   std::span<const double> mic_block);

  // Halves mu once the error energy exceeds the microphone energy for
  // `divergence_window` consecutive blocks, then restarts the count.
  // Returns true when mu was halved.
  bool CheckDivergence(std::span<const double> err_block,
                       std::span<const double> mic_block);

  // Loads time-domain taps (at most partitions * B of them) into the filter.
  void SetTaps(std::span<const double> taps);
  // Current filter as time-domain taps, partitions * B long.
  std::vector<double> Taps();
  // Time-domain image of partition p over the full 2B FFT length. The upper
  // B samples are zero when the gradient constraint holds.
  std::vector<double> PartitionImage(std::size_t p);
  const std::vector<std::complex<double>>& partition(std::size_t p) const {
    return partitions_[p];
  }

 private:
  std::size_t block_;
  std::size_t fft_size_;
  std::size_t bins_;
  double mu_;
  double power_smoothing_;
  double regularization_;
  std::size_t divergence_window_;
  std::size_t violation_run_ = 0;
  std::size_t halvings_ = 0;

  std::vector<std::vector<std::complex<double>>> partitions_;
  // Far-end spectra, newest at history_head_.
  std::vector<std::vector<std::complex<double>>> history_;
  std::size_t history_head_ = 0;
  std::vector<double> power_;
  std::vector<double> previous_far_;

  RealFft fft_;
  std::vector<double> time_;
  std::vector<std::complex<double>> spectrum_;
  std::vector<std::complex<double>> error_spectrum_;
};

// Runs the canceler over whole signals in blocks of B, checking divergence
// after every block. Trailing samples are processed with zero padding and
// the result has the length of `mic`.
std::vector<double> RunPfbLms(PfbLms& filter, std::span<const double> far,
                              std::span<const double> mic);

}  // namespace unetaec

#endif  // UNETAEC_PFB_LMS_H_
