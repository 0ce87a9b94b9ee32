#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.h"
#include "unetaec/fft.h"
#include "unetaec/stft.h"

namespace unetaec {
namespace {

TEST(HannWindowTest, EndpointsAndPeak) {
  const auto w = HannWindow(318);
  ASSERT_EQ(w.size(), 318u);
  EXPECT_EQ(w[0], 0.0);
  EXPECT_NEAR(w[159], 1.0, 1e-12);
  for (double v : w) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(HannWindowTest, LengthFourByFormula) {
  const auto w = HannWindow(4);
  ASSERT_EQ(w.size(), 4u);
  for (std::size_t n = 0; n < 4; ++n) {
    EXPECT_NEAR(w[n], oracle::HannValue(n, 4), 1e-15);
  }
  EXPECT_NEAR(w[1], 0.5, 1e-15);
  EXPECT_NEAR(w[2], 1.0, 1e-15);
}

TEST(HannWindowTest, RejectsShortLength) {
  EXPECT_THROW(HannWindow(1), std::invalid_argument);
  EXPECT_THROW(HannWindow(0), std::invalid_argument);
}

TEST(RealFftTest, MatchesNaiveDft) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {2u, 7u, 318u, 2048u}) {
    RealFft fft(n);
    const auto x = oracle::RandomVector(n, rng);
    std::vector<std::complex<double>> got(fft.num_bins());
    fft.Forward(x, got);
    const auto want = oracle::NaiveDft(x);
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_NEAR(std::abs(got[k] - want[k]), 0.0, 1e-9 * static_cast<double>(n));
    }
    std::vector<double> back(n);
    fft.Inverse(got, back);
    EXPECT_LT(oracle::MaxAbsDiff(back, x), 1e-12);
  }
}

TEST(StftTest, ZeroSegmentGivesZeroBins) {
  const std::vector<double> zeros(kFrameSamples, 0.0);
  const auto spec = Stft(zeros);
  ASSERT_TRUE(spec.HasStandardShape());
  for (const auto& v : spec.bins.data()) EXPECT_EQ(std::abs(v), 0.0);
}

TEST(StftTest, ConstantSegmentInteriorDcEqualsWindowSum) {
  const std::vector<double> ones(kFrameSamples, 1.0);
  const auto spec = Stft(ones);
  for (std::size_t t = 3; t <= 28; ++t) {
    EXPECT_NEAR(std::abs(spec.bins(0, t)), 159.0, 1e-6) << "frame " << t;
  }
}

TEST(StftTest, SinusoidPeaksAtItsBin) {
  std::vector<double> x(kFrameSamples);
  const double f = 5.0 * kSampleRateHz / 318.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    x[n] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(n) / kSampleRateHz);
  }
  const auto spec = Stft(x);
  std::size_t best = 0;
  double best_mean = -1.0;
  for (std::size_t k = 0; k < kNumBins; ++k) {
    double mean = 0.0;
    for (std::size_t t = 3; t <= 28; ++t) mean += std::abs(spec.bins(k, t));
    if (mean > best_mean) {
      best_mean = mean;
      best = k;
    }
  }
  EXPECT_EQ(best, 5u);
}

TEST(StftTest, MatchesBruteForceFraming) {
  std::mt19937_64 rng(2);
  const auto x = oracle::RandomVector(kFrameSamples, rng);
  const auto spec = Stft(x);
  for (std::size_t t : {0u, 1u, 15u, 30u, 31u}) {
    const auto want = oracle::NaiveStftFrame(x, t);
    for (std::size_t k = 0; k < kNumBins; ++k) {
      EXPECT_NEAR(std::abs(spec.bins(k, t) - want[k]), 0.0, 1e-9);
    }
  }
}

TEST(StftTest, RejectsWrongLength) {
  const std::vector<double> x(kFrameSamples - 1, 0.0);
  EXPECT_THROW(Stft(x), std::invalid_argument);
  ComplexSpectrogram bad;
  bad.bins.Resize(kNumBins, 31);
  EXPECT_THROW(Istft(bad), std::invalid_argument);
}

TEST(StftTest, IsLinear) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    const auto a = oracle::RandomVector(kFrameSamples, rng);
    const auto b = oracle::RandomVector(kFrameSamples, rng);
    const double alpha = 0.7, beta = -1.3;
    std::vector<double> mix(kFrameSamples);
    for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * a[i] + beta * b[i];
    const auto sa = Stft(a), sb = Stft(b), sm = Stft(mix);
    for (std::size_t i = 0; i < sm.bins.size(); ++i) {
      const auto want = alpha * sa.bins.data()[i] + beta * sb.bins.data()[i];
      EXPECT_NEAR(std::abs(sm.bins.data()[i] - want), 0.0, 1e-9);
    }
  }
}

// With the window applied, an interior frame's energy in the time domain
// equals (|X_0|^2 + 2 sum_{0<k<N/2} |X_k|^2 + |X_{N/2}|^2) / N.
TEST(StftTest, ParsevalOnInteriorFrames) {
  std::mt19937_64 rng(4);
  const auto x = oracle::RandomVector(kFrameSamples, rng);
  const auto spec = Stft(x);
  const auto w = HannWindow(kWindowSize);
  for (std::size_t t = 3; t <= 28; ++t) {
    double time_energy = 0.0;
    for (std::size_t n = 0; n < kWindowSize; ++n) {
      const double v = x[t * kHopSize + n - kEdgePad] * w[n];
      time_energy += v * v;
    }
    double freq_energy = 0.0;
    for (std::size_t k = 0; k < kNumBins; ++k) {
      const double weight = (k == 0 || k == kNumBins - 1) ? 1.0 : 2.0;
      freq_energy += weight * std::norm(spec.bins(k, t));
    }
    freq_energy /= static_cast<double>(kWindowSize);
    EXPECT_NEAR(freq_energy / time_energy, 1.0, 1e-6);
  }
}

TEST(IstftTest, RoundTripOnValidRegion) {
  std::mt19937_64 rng(5);
  StftProcessor proc;
  ComplexSpectrogram spec;
  std::vector<double> back(kFrameSamples);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = oracle::RandomVector(kFrameSamples, rng);
    proc.Forward(x, &spec);
    proc.Inverse(spec, back);
    double err = 0.0;
    std::size_t count = 0;
    for (std::size_t n = 0; n < kFrameSamples; ++n) {
      if (proc.window_square_sum()[n] < 1e-3) continue;
      err += (back[n] - x[n]) * (back[n] - x[n]);
      ++count;
    }
    EXPECT_GT(count, kFrameSamples - 10);
    EXPECT_LT(std::sqrt(err / static_cast<double>(count)), 1e-6);
  }
}

TEST(IstftTest, ZeroSpectrogramGivesZeroSegment) {
  ComplexSpectrogram spec;
  for (double v : Istft(spec)) EXPECT_EQ(v, 0.0);
}

TEST(IstftTest, IsLinear) {
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexSpectrogram s1, s2, mix;
  for (std::size_t i = 0; i < s1.bins.size(); ++i) {
    s1.bins.data()[i] = {n(rng), n(rng)};
    s2.bins.data()[i] = {n(rng), n(rng)};
    mix.bins.data()[i] = 2.0 * s1.bins.data()[i] - 0.5 * s2.bins.data()[i];
  }
  const auto a = Istft(s1), b = Istft(s2), m = Istft(mix);
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_NEAR(m[i], 2.0 * a[i] - 0.5 * b[i], 1e-9);
  }
}

TEST(MagnitudePhaseTest, ThreeFourFive) {
  ComplexSpectrogram spec;
  spec.bins(0, 0) = {3.0, 4.0};
  const auto mp = SplitMagnitudePhase(spec);
  EXPECT_DOUBLE_EQ(mp.magnitude(0, 0), 5.0);
  EXPECT_DOUBLE_EQ(mp.phase(0, 0), std::atan2(4.0, 3.0));
  // Zero entries get phase 0.
  EXPECT_EQ(mp.magnitude(1, 1), 0.0);
  EXPECT_EQ(mp.phase(1, 1), 0.0);
}

TEST(MagnitudePhaseTest, RandomRoundTrip) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> n(0.0, 1.0);
  ComplexSpectrogram spec;
  for (auto& v : spec.bins.data()) v = {n(rng), n(rng)};
  const auto mp = SplitMagnitudePhase(spec);
  const auto back = Recombine(mp.magnitude, mp.phase);
  for (std::size_t i = 0; i < spec.bins.size(); ++i) {
    EXPECT_NEAR(std::abs(back.bins.data()[i] - spec.bins.data()[i]), 0.0, 1e-9);
  }
}

TEST(MagnitudePhaseTest, RecombineRejectsShapeMismatch) {
  RealGrid mag(kNumBins, kNumFrames), phase(kNumBins, kNumFrames - 1);
  EXPECT_THROW(Recombine(mag, phase), std::invalid_argument);
}

}  // namespace
}  // namespace unetaec
