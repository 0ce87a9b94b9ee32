#ifndef UNETAEC_FFT_H_
#define UNETAEC_FFT_H_

#include <complex>
#include <cstddef>
#include <span>

namespace unetaec {

// Real-input DFT of a fixed length backed by FFTW. Forward is unnormalized;
// Inverse divides by the length, so Inverse(Forward(x)) == x.
//
// Plans are created with FFTW_ESTIMATE so results are bit-reproducible from
// run to run. One instance must not be used from two threads at once;
// distinct instances may run concurrently.
class RealFft {
 public:
  explicit RealFft(std::size_t length);
  ~RealFft();
  RealFft(const RealFft&) = delete;
  RealFft& operator=(const RealFft&) = delete;
  RealFft(RealFft&& other) noexcept;
  RealFft& operator=(RealFft&& other) noexcept;

  std::size_t length() const { return length_; }
  std::size_t num_bins() const { return length_ / 2 + 1; }

  // `in` has length() samples, `out` has num_bins() entries.
  void Forward(std::span<const double> in,
               std::span<std::complex<double>> out);
  // `in` has num_bins() entries, `out` has length() samples. The imaginary
  // parts of the DC and (for even lengths) Nyquist bins are ignored.
  void Inverse(std::span<const std::complex<double>> in,
               std::span<double> out);

 private:
  void Release();

  std::size_t length_ = 0;
  double* real_ = nullptr;
  void* spectrum_ = nullptr;  // fftw_complex*
  void* forward_plan_ = nullptr;
  void* inverse_plan_ = nullptr;
};

}  // namespace unetaec

#endif  // UNETAEC_FFT_H_
