#include "unetaec/fft.h"

#include <fftw3.h>

#include <algorithm>
#include <mutex>
#include <utility>

#include "unetaec/common.h"

namespace unetaec {
namespace {

// The FFTW planner is not thread safe; execution on distinct plans is.
std::mutex& PlannerMutex() {
  static std::mutex mutex;
  return mutex;
}

}  // namespace

RealFft::RealFft(std::size_t length) : length_(length) {
  Require(length >= 2, "RealFft: length must be at least 2");
  std::lock_guard<std::mutex> lock(PlannerMutex());
  real_ = fftw_alloc_real(length_);
  auto* spectrum = fftw_alloc_complex(num_bins());
  spectrum_ = spectrum;
  const int n = static_cast<int>(length_);
  forward_plan_ = fftw_plan_dft_r2c_1d(n, real_, spectrum, FFTW_ESTIMATE);
  inverse_plan_ = fftw_plan_dft_c2r_1d(n, spectrum, real_, FFTW_ESTIMATE);
}

RealFft::~RealFft() { Release(); }

RealFft::RealFft(RealFft&& other) noexcept
    : length_(other.length_),
      real_(std::exchange(other.real_, nullptr)),
      spectrum_(std::exchange(other.spectrum_, nullptr)),
      forward_plan_(std::exchange(other.forward_plan_, nullptr)),
      inverse_plan_(std::exchange(other.inverse_plan_, nullptr)) {}

RealFft& RealFft::operator=(RealFft&& other) noexcept {
  if (this != &other) {
    Release();
    length_ = other.length_;
    real_ = std::exchange(other.real_, nullptr);
    spectrum_ = std::exchange(other.spectrum_, nullptr);
    forward_plan_ = std::exchange(other.forward_plan_, nullptr);
    inverse_plan_ = std::exchange(other.inverse_plan_, nullptr);
  }
  return *this;
}

void RealFft::Release() {
  if (real_ == nullptr && spectrum_ == nullptr) return;
  std::lock_guard<std::mutex> lock(PlannerMutex());
  if (forward_plan_) fftw_destroy_plan(static_cast<fftw_plan>(forward_plan_));
  if (inverse_plan_) fftw_destroy_plan(static_cast<fftw_plan>(inverse_plan_));
  fftw_free(real_);
  fftw_free(spectrum_);
  real_ = nullptr;
  spectrum_ = nullptr;
  forward_plan_ = nullptr;
  inverse_plan_ = nullptr;
}

void RealFft::Forward(std::span<const double> in,
                      std::span<std::complex<double>> out) {
  Require(in.size() == length_ && out.size() == num_bins(),
          "RealFft::Forward: size mismatch");
  std::copy(in.begin(), in.end(), real_);
  fftw_execute(static_cast<fftw_plan>(forward_plan_));
  const auto* spectrum = static_cast<const fftw_complex*>(spectrum_);
  for (std::size_t k = 0; k < out.size(); ++k) {
    out[k] = {spectrum[k][0], spectrum[k][1]};
  }
}

void RealFft::Inverse(std::span<const std::complex<double>> in,
                      std::span<double> out) {
  Require(in.size() == num_bins() && out.size() == length_,
          "RealFft::Inverse: size mismatch");
  auto* spectrum = static_cast<fftw_complex*>(spectrum_);
  for (std::size_t k = 0; k < in.size(); ++k) {
    spectrum[k][0] = in[k].real();
    spectrum[k][1] = in[k].imag();
  }
  spectrum[0][1] = 0.0;
  if (length_ % 2 == 0) spectrum[num_bins() - 1][1] = 0.0;
  fftw_execute(static_cast<fftw_plan>(inverse_plan_));
  const double scale = 1.0 / static_cast<double>(length_);
  for (std::size_t n = 0; n < length_; ++n) out[n] = real_[n] * scale;
}

}  // namespace unetaec
