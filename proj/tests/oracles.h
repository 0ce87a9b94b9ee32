// Brute-force reference implementations used by the tests. None of these
// call into the library code they are compared against; they only borrow
// its plain containers (Tensor, ConvLayer, NetParams) to hold data.

#ifndef UNETAEC_TESTS_ORACLES_H_
#define UNETAEC_TESTS_ORACLES_H_

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <span>
#include <vector>

#include "unetaec/common.h"
#include "unetaec/tensor.h"
#include "unetaec/weights.h"

namespace oracle {

using unetaec::ConvLayer;
using unetaec::NetParams;
using unetaec::Tensor;

inline std::vector<double> RandomVector(std::size_t n, std::mt19937_64& rng,
                                        double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  std::vector<double> v(n);
  for (double& x : v) x = dist(rng);
  return v;
}

inline Tensor<double> RandomTensor(std::size_t f, std::size_t t, std::size_t c,
                                   std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Tensor<double> out(f, t, c);
  for (double& x : out.data()) x = dist(rng);
  return out;
}

inline double Rms(std::span<const double> v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s / static_cast<double>(v.size()));
}

inline double RmsDiff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  const std::size_t n = std::min(a.size(), b.size());
  for (std::size_t i = 0; i < n; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return n == 0 ? 0.0 : std::sqrt(s / static_cast<double>(n));
}

inline double MaxAbsDiff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

// ---------------------------------------------------------------- signal

inline double HannValue(std::size_t n, std::size_t length) {
  return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                               static_cast<double>(length)));
}

// One-sided DFT by direct summation, O(N^2).
inline std::vector<std::complex<double>> NaiveDft(std::span<const double> x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double phase = -2.0 * std::numbers::pi * static_cast<double>(k * i % n) /
                           static_cast<double>(n);
      acc += x[i] * std::polar(1.0, phase);
    }
    out[k] = acc;
  }
  return out;
}

// Spectrogram column `frame` of a 2560-sample segment, computed from the
// framing rule directly: pad 119 zeros per side, take 318 samples at 80*t,
// apply the periodic Hann window, DFT.
inline std::vector<std::complex<double>> NaiveStftFrame(
    std::span<const double> segment, std::size_t frame) {
  std::vector<double> buf(unetaec::kWindowSize, 0.0);
  for (std::size_t n = 0; n < unetaec::kWindowSize; ++n) {
    const long idx = static_cast<long>(frame * unetaec::kHopSize + n) -
                     static_cast<long>(unetaec::kEdgePad);
    if (idx >= 0 && idx < static_cast<long>(segment.size())) {
      buf[n] = segment[static_cast<std::size_t>(idx)] *
               HannValue(n, unetaec::kWindowSize);
    }
  }
  return NaiveDft(buf);
}

// Linear convolution, output truncated to the signal length.
inline std::vector<double> DirectConvolve(std::span<const double> x,
                                          std::span<const double> h) {
  std::vector<double> y(x.size(), 0.0);
  for (std::size_t n = 0; n < x.size(); ++n) {
    double acc = 0.0;
    const std::size_t kmax = std::min(h.size(), n + 1);
    for (std::size_t k = 0; k < kmax; ++k) acc += h[k] * x[n - k];
    y[n] = acc;
  }
  return y;
}

// Sample-by-sample normalized LMS, the time-domain counterpart of the block
// frequency-domain filter. Returns the error signal.
inline std::vector<double> TimeDomainNlms(std::span<const double> far,
                                          std::span<const double> mic,
                                          std::size_t taps, double mu,
                                          double delta = 1e-6) {
  std::vector<double> w(taps, 0.0);
  std::vector<double> buf(taps, 0.0);  // buf[k] = x[n - k]
  std::vector<double> err(mic.size());
  double energy = 0.0;
  for (std::size_t n = 0; n < mic.size(); ++n) {
    energy -= buf[taps - 1] * buf[taps - 1];
    std::copy_backward(buf.begin(), buf.end() - 1, buf.end());
    buf[0] = far[n];
    energy += far[n] * far[n];
    energy = std::max(energy, 0.0);
    double y = 0.0;
    for (std::size_t k = 0; k < taps; ++k) y += w[k] * buf[k];
    const double e = mic[n] - y;
    err[n] = e;
    const double g = mu * e / (energy + delta);
    for (std::size_t k = 0; k < taps; ++k) w[k] += g * buf[k];
  }
  return err;
}

inline double ErleDb(std::span<const double> mic, std::span<const double> err) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < mic.size(); ++i) {
    num += mic[i] * mic[i];
    den += err[i] * err[i];
  }
  return 10.0 * std::log10(num / den);
}

// ---------------------------------------------------------------- network

template <typename S>
inline S KernelAt(const ConvLayer<S>& l, int o, int c, int dy, int dx) {
  const int in = l.spec.in_channels;
  const int kh = l.spec.kernel_h;
  const int kw = l.spec.kernel_w;
  return l.kernel[static_cast<std::size_t>(((o * in + c) * kh + dy) * kw + dx)];
}

// Same-padded stride-1 convolution as four nested loops (plus the kernel).
template <typename S>
inline Tensor<S> Conv(const Tensor<S>& in, const ConvLayer<S>& l,
                           bool relu) {
  const int kh = l.spec.kernel_h;
  const int kw = l.spec.kernel_w;
  const auto out_ch = static_cast<std::size_t>(l.spec.out_channels);
  Tensor<S> out(in.freq(), in.time(), out_ch);
  for (std::size_t o = 0; o < out_ch; ++o) {
    for (std::size_t f = 0; f < in.freq(); ++f) {
      for (std::size_t t = 0; t < in.time(); ++t) {
        S acc = l.bias[o];
        for (std::size_t c = 0; c < in.channels(); ++c) {
          for (int dy = 0; dy < kh; ++dy) {
            for (int dx = 0; dx < kw; ++dx) {
              const long sf = static_cast<long>(f) + dy - kh / 2;
              const long st = static_cast<long>(t) + dx - kw / 2;
              if (sf < 0 || st < 0 || sf >= static_cast<long>(in.freq()) ||
                  st >= static_cast<long>(in.time())) {
                continue;
              }
              acc += KernelAt(l, static_cast<int>(o), static_cast<int>(c), dy, dx) *
                     in(static_cast<std::size_t>(sf), static_cast<std::size_t>(st), c);
            }
          }
        }
        out(f, t, o) = relu ? std::max(acc, S{0}) : acc;
      }
    }
  }
  return out;
}

template <typename S>
inline Tensor<S> MaxPool(const Tensor<S>& in) {
  Tensor<S> out(in.freq() / 2, in.time(), in.channels());
  for (std::size_t c = 0; c < in.channels(); ++c)
    for (std::size_t f = 0; f < out.freq(); ++f)
      for (std::size_t t = 0; t < in.time(); ++t)
        out(f, t, c) = std::max(in(2 * f, t, c), in(2 * f + 1, t, c));
  return out;
}

// Transposed convolution with a 2x1 kernel and stride 2x1, written as a
// scatter: every input pixel deposits kernel-weighted copies into the two
// output rows it covers.
template <typename S>
inline Tensor<S> Upsample(const Tensor<S>& in, const ConvLayer<S>& l) {
  const auto out_ch = static_cast<std::size_t>(l.spec.out_channels);
  Tensor<S> out(in.freq() * 2, in.time(), out_ch);
  for (std::size_t o = 0; o < out_ch; ++o)
    for (std::size_t f = 0; f < out.freq(); ++f)
      for (std::size_t t = 0; t < out.time(); ++t) out(f, t, o) = l.bias[o];
  for (std::size_t f = 0; f < in.freq(); ++f)
    for (std::size_t t = 0; t < in.time(); ++t)
      for (std::size_t c = 0; c < in.channels(); ++c)
        for (int j = 0; j < 2; ++j)
          for (std::size_t o = 0; o < out_ch; ++o)
            out(2 * f + static_cast<std::size_t>(j), t, o) +=
                KernelAt(l, static_cast<int>(o), static_cast<int>(c), j, 0) * in(f, t, c);
  return out;
}

template <typename S>
inline Tensor<S> Concat(const Tensor<S>& a, const Tensor<S>& b) {
  Tensor<S> out(a.freq(), a.time(), a.channels() + b.channels());
  for (std::size_t f = 0; f < a.freq(); ++f)
    for (std::size_t t = 0; t < a.time(); ++t) {
      for (std::size_t c = 0; c < a.channels(); ++c) out(f, t, c) = a(f, t, c);
      for (std::size_t c = 0; c < b.channels(); ++c)
        out(f, t, a.channels() + c) = b(f, t, c);
    }
  return out;
}

template <typename S>
inline Tensor<S> Sum(const Tensor<S>& a, const Tensor<S>& b) {
  Tensor<S> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += b.data()[i];
  return out;
}

// Residual block from its description: a = relu(conv(in)); the stack of N
// relu convs runs on a; the shortcut is a (conf1) or a linear conv of a
// (conf2); output = stack + shortcut. Consumes layers from *next.
template <typename S>
inline Tensor<S> Block(const Tensor<S>& in, const NetParams<S>& p,
                            std::size_t* next) {
  const auto& topo = p.topology;
  const Tensor<S> a = Conv(in, p.layers[(*next)++], true);
  Tensor<S> h = a;
  for (int j = 0; j < topo.residual_depth; ++j) h = Conv(h, p.layers[(*next)++], true);
  Tensor<S> shortcut = a;
  if (topo.residual_config == unetaec::ResidualConfig::kConf2) {
    shortcut = Conv(a, p.layers[(*next)++], false);
  }
  return Sum(h, shortcut);
}

// Straight-line network: encoder blocks with pooling in between, decoder
// levels of upsample, concat [upsampled, skip] and a block, 1x1 output.
template <typename S>
inline Tensor<S> Forward(const NetParams<S>& p, const Tensor<S>& x,
                              bool clamp) {
  std::size_t next = 0;
  std::vector<Tensor<S>> skips;
  Tensor<S> h = x;
  for (int i = 0; i < p.topology.num_encoders; ++i) {
    if (i > 0) h = MaxPool(h);
    h = Block(h, p, &next);
    skips.push_back(h);
  }
  for (int i = p.topology.num_encoders - 2; i >= 0; --i) {
    h = Upsample(h, p.layers[next++]);
    h = Block(Concat(h, skips[static_cast<std::size_t>(i)]), p, &next);
  }
  return Conv(h, p.layers[next++], clamp);
}

// Root mean square difference over the newest `frames` time frames.
template <typename S>
inline S TailRmsLoss(const Tensor<S>& est, const Tensor<S>& target, std::size_t frames) {
  S sum = 0;
  for (std::size_t f = 0; f < est.freq(); ++f)
    for (std::size_t t = est.time() - frames; t < est.time(); ++t) {
      const S d = est(f, t, 0) - target(f, t, 0);
      sum += d * d;
    }
  return std::sqrt(sum / static_cast<S>(frames * est.freq()));
}

// Parameter count from the architecture description alone, one term per
// layer written out by hand rather than by walking a layer list.
inline std::size_t ParamCount(int encoders, int f0, bool conf2, int depth,
                              int in_channels = 2) {
  auto conv = [](std::size_t in, std::size_t out, std::size_t k) {
    return in * out * k + out;
  };
  auto block = [&](std::size_t in, std::size_t f) {
    std::size_t n = conv(in, f, 9);
    n += static_cast<std::size_t>(depth) * conv(f, f, 9);
    if (conf2) n += conv(f, f, 9);
    return n;
  };
  std::size_t total = 0;
  std::size_t ch = static_cast<std::size_t>(in_channels);
  for (int i = 0; i < encoders; ++i) {
    const std::size_t f = static_cast<std::size_t>(f0) << i;
    total += block(ch, f);
    ch = f;
  }
  for (int i = encoders - 2; i >= 0; --i) {
    const std::size_t f = static_cast<std::size_t>(f0) << i;
    total += conv(2 * f, f, 2);  // transposed 2x1
    total += block(2 * f, f);
  }
  total += conv(static_cast<std::size_t>(f0), 1, 1);
  return total;
}

// ---------------------------------------------------------------- fp16

inline double DecodeHalf(std::uint16_t h) {
  const int sign = (h >> 15) & 1;
  const int exp = (h >> 10) & 0x1f;
  const int mant = h & 0x3ff;
  double v = exp == 0 ? std::ldexp(mant, -24) : std::ldexp(1024 + mant, exp - 25);
  return sign ? -v : v;
}

// Nearest finite half by exhaustive search over all 63488 finite codes;
// ties go to the even mantissa. Values past the top of the range land on
// +-65504, matching saturating conversion.
inline double NearestHalf(double x) {
  double best = 0.0;
  double best_err = INFINITY;
  int best_mant = 0;
  for (std::uint32_t h = 0; h < 0x10000; ++h) {
    if (((h >> 10) & 0x1f) == 0x1f) continue;
    const double v = DecodeHalf(static_cast<std::uint16_t>(h));
    const double err = std::abs(v - x);
    const int mant = static_cast<int>(h & 1);
    if (err < best_err || (err == best_err && mant == 0 && best_mant == 1)) {
      best = v;
      best_err = err;
      best_mant = mant;
    }
  }
  return best;
}

// ---------------------------------------------------------------- calculus

// Central difference of f at x[i] with step h.
inline double CentralDifference(const std::function<double()>& f, double* x,
                                double h) {
  const double saved = *x;
  *x = saved + h;
  const double up = f();
  *x = saved - h;
  const double down = f();
  *x = saved;
  return (up - down) / (2.0 * h);
}

inline double RelativeError(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

}  // namespace oracle

#endif  // UNETAEC_TESTS_ORACLES_H_
