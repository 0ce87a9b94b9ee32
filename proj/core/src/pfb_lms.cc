#include "unetaec/pfb_lms.h"

#include <algorithm>
#include <bit>
#include <cmath>

#include "unetaec/common.h"

namespace unetaec {
namespace {

std::size_t FftSizeFor(std::size_t block_size) {
  Require(std::has_single_bit(block_size),
          "pfb-lms: block size must be a power of two");
  return 2 * block_size;
}

}  // namespace

PfbLms::PfbLms(const PfbLmsConfig& config)
    : block_(config.block_size),
      fft_size_(2 * config.block_size),
      bins_(config.block_size + 1),
      mu_(config.mu),
      power_smoothing_(config.power_smoothing),
      regularization_(config.regularization),
      divergence_window_(config.divergence_window),
      fft_(FftSizeFor(config.block_size)) {
  Require(config.num_taps >= 1, "pfb-lms: num_taps must be at least 1");
  Require(std::isfinite(config.mu) && config.mu >= 0.0,
          "pfb-lms: mu must be finite and non-negative");
  Require(config.power_smoothing >= 0.0 && config.power_smoothing < 1.0,
          "pfb-lms: power smoothing must be in [0, 1)");
  Require(config.divergence_window >= 1,
          "pfb-lms: divergence window must be positive");
  const std::size_t count = (config.num_taps + block_ - 1) / block_;
  partitions_.assign(count, std::vector<std::complex<double>>(bins_));
  history_.assign(count, std::vector<std::complex<double>>(bins_));
  power_.assign(bins_, 0.0);
  previous_far_.assign(block_, 0.0);
  time_.assign(fft_size_, 0.0);
  spectrum_.assign(bins_, {});
  error_spectrum_.assign(bins_, {});
}

void PfbLms::ProcessBlock(std::span<const double> far_block,
                          std::span<const double> mic_block,
                          std::span<double> err_block) {
  Require(far_block.size() == block_ && mic_block.size() == block_ &&
              err_block.size() == block_,
          "pfb-lms: block size mismatch");
  const std::size_t count = partitions_.size();

  std::copy(previous_far_.begin(), previous_far_.end(), time_.begin());
  std::copy(far_block.begin(), far_block.end(), time_.begin() + block_);
  std::copy(far_block.begin(), far_block.end(), previous_far_.begin());
  history_head_ = (history_head_ + count - 1) % count;
  fft_.Forward(time_, history_[history_head_]);

  std::fill(spectrum_.begin(), spectrum_.end(), std::complex<double>{});
  for (std::size_t p = 0; p < count; ++p) {
    const auto& x = history_[(history_head_ + p) % count];
    const auto& w = partitions_[p];
    for (std::size_t k = 0; k < bins_; ++k) spectrum_[k] += w[k] * x[k];
  }
  fft_.Inverse(spectrum_, time_);
  for (std::size_t n = 0; n < block_; ++n) {
    err_block[n] = mic_block[n] - time_[block_ + n];
  }

  // Regressor energy of the whole partitioned filter per bin. The smoothed
  // estimate follows rises at once (talk-spurt onsets would otherwise see
  // an oversized step) and decays slowly.
  for (std::size_t k = 0; k < bins_; ++k) {
    double energy = 0.0;
    for (const auto& x : history_) energy += std::norm(x[k]);
    const double smoothed =
        power_smoothing_ * power_[k] + (1.0 - power_smoothing_) * energy;
    power_[k] = std::max(smoothed, energy);
  }
  if (mu_ == 0.0) return;

  std::fill(time_.begin(), time_.begin() + block_, 0.0);
  std::copy(err_block.begin(), err_block.end(), time_.begin() + block_);
  fft_.Forward(time_, error_spectrum_);
  for (std::size_t k = 0; k < bins_; ++k) {
    error_spectrum_[k] *= mu_ / (power_[k] + regularization_);
  }
  for (std::size_t p = 0; p < count; ++p) {
    const auto& x = history_[(history_head_ + p) % count];
    for (std::size_t k = 0; k < bins_; ++k) {
      spectrum_[k] = std::conj(x[k]) * error_spectrum_[k];
    }
    fft_.Inverse(spectrum_, time_);
    // Gradient constraint: keep the causal half of the correlation.
    std::fill(time_.begin() + block_, time_.end(), 0.0);
    fft_.Forward(time_, spectrum_);
    auto& w = partitions_[p];
    for (std::size_t k = 0; k < bins_; ++k) w[k] += spectrum_[k];
  }
}

std::vector<double> PfbLms::ProcessBlock(std::span<const double> far_block,
                                         std::span<const double> mic_block) {
  std::vector<double> err(block_);
  ProcessBlock(far_block, mic_block, err);
  return err;
}

bool PfbLms::CheckDivergence(std::span<const double> err_block,
                             std::span<const double> mic_block) {
  Require(err_block.size() == mic_block.size(),
          "pfb-lms: divergence check size mismatch");
  double err_energy = 0.0;
  double mic_energy = 0.0;
  for (std::size_t n = 0; n < err_block.size(); ++n) {
    err_energy += err_block[n] * err_block[n];
    mic_energy += mic_block[n] * mic_block[n];
  }
  if (err_energy > mic_energy) {
    ++violation_run_;
  } else {
    violation_run_ = 0;
  }
  if (violation_run_ < divergence_window_) return false;
  violation_run_ = 0;
  mu_ *= 0.5;
  ++halvings_;
  return true;
}

void PfbLms::SetTaps(std::span<const double> taps) {
  Require(taps.size() <= partitions_.size() * block_,
          "pfb-lms: too many taps for the configured partitions");
  for (std::size_t p = 0; p < partitions_.size(); ++p) {
    std::fill(time_.begin(), time_.end(), 0.0);
    const std::size_t begin = std::min(taps.size(), p * block_);
    const std::size_t end = std::min(taps.size(), (p + 1) * block_);
    std::copy(taps.begin() + begin, taps.begin() + end, time_.begin());
    fft_.Forward(time_, partitions_[p]);
  }
}

std::vector<double> PfbLms::PartitionImage(std::size_t p) {
  Require(p < partitions_.size(), "pfb-lms: partition index out of range");
  std::vector<double> image(fft_size_);
  fft_.Inverse(partitions_[p], image);
  return image;
}

std::vector<double> PfbLms::Taps() {
  std::vector<double> taps;
  taps.reserve(partitions_.size() * block_);
  for (std::size_t p = 0; p < partitions_.size(); ++p) {
    auto image = PartitionImage(p);
    taps.insert(taps.end(), image.begin(), image.begin() + block_);
  }
  return taps;
}

std::vector<double> RunPfbLms(PfbLms& filter, std::span<const double> far,
                              std::span<const double> mic) {
  Require(far.size() == mic.size(), "pfb-lms: signal length mismatch");
  const std::size_t block = filter.block_size();
  std::vector<double> out(mic.size());
  std::vector<double> far_block(block);
  std::vector<double> mic_block(block);
  std::vector<double> err_block(block);
  for (std::size_t start = 0; start < mic.size(); start += block) {
    const std::size_t n = std::min(block, mic.size() - start);
    std::fill(far_block.begin(), far_block.end(), 0.0);
    std::fill(mic_block.begin(), mic_block.end(), 0.0);
    std::copy_n(far.begin() + start, n, far_block.begin());
    std::copy_n(mic.begin() + start, n, mic_block.begin());
    filter.ProcessBlock(far_block, mic_block, err_block);
    filter.CheckDivergence(err_block, mic_block);
    std::copy_n(err_block.begin(), n, out.begin() + start);
  }
  return out;
}

}  // namespace unetaec
