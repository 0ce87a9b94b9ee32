#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.h"
#include "unetaec/fp16.h"
#include "unetaec/layers.h"
#include "unetaec/topology.h"
#include "unetaec/unet.h"
#include "unetaec/weights.h"

namespace unetaec {
namespace {

ConvLayer<double> MakeLayer(LayerKind kind, int in, int out, int kh, int kw,
                            std::mt19937_64& rng, double scale = 0.5) {
  ConvLayer<double> l;
  l.spec = {"test", kind, in, out, kh, kw, Activation::kLinear};
  l.kernel = oracle::RandomVector(l.spec.kernel_elements(), rng, scale);
  l.bias = oracle::RandomVector(static_cast<std::size_t>(out), rng, scale);
  return l;
}

double MaxDiff(const Tensor<double>& a, const Tensor<double>& b) {
  EXPECT_TRUE(a.SameShape(b));
  return oracle::MaxAbsDiff(a.data(), b.data());
}

NetParams<double> RandomParams(const NetTopology& t, std::uint64_t seed,
                               double bias_scale = 0.1) {
  auto p = CastParams<double>(RandomWeights(t, seed).params);
  std::mt19937_64 rng(seed + 99);
  std::normal_distribution<double> n(0.0, bias_scale);
  for (auto& l : p.layers)
    for (double& b : l.bias) b = n(rng);
  return p;
}

Tensor<double> UniformInput(std::size_t f, std::size_t t, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<double> x(f, t, 2);
  for (double& v : x.data()) v = u(rng);
  return x;
}

NetTopology Tiny(ResidualConfig config, int f0 = 2, int depth = 1) {
  NetTopology t;
  t.base_filters = f0;
  t.residual_config = config;
  t.residual_depth = depth;
  return t;
}

// ------------------------------------------------------------ conv2d

TEST(Conv2dTest, IdentityKernelCopiesInput) {
  std::mt19937_64 rng(30);
  const auto x = oracle::RandomTensor(6, 5, 1, rng);
  ConvLayer<double> l;
  l.spec = {"id", LayerKind::kConv, 1, 1, 3, 3, Activation::kLinear};
  l.kernel.assign(9, 0.0);
  l.kernel[4] = 1.0;
  l.bias = {0.0};
  EXPECT_EQ(Conv2d(x, l, Activation::kLinear), x);
}

TEST(Conv2dTest, AllOnesKernelOnConstantInterior) {
  const Tensor<double> x(5, 5, 1, 1.0);
  ConvLayer<double> l;
  l.spec = {"ones", LayerKind::kConv, 1, 1, 3, 3, Activation::kLinear};
  l.kernel.assign(9, 1.0);
  l.bias = {0.0};
  const auto y = Conv2d(x, l, Activation::kLinear);
  EXPECT_EQ(y(2, 2, 0), 9.0);
  EXPECT_EQ(y(0, 0, 0), 4.0);  // corner sees a 2x2 patch
}

TEST(Conv2dTest, MatchesLoopOracle) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int in = 1 + trial % 3, out = 1 + (trial * 7) % 4;
    const auto x = oracle::RandomTensor(5, 4, static_cast<std::size_t>(in), rng);
    const auto l = MakeLayer(LayerKind::kConv, in, out, 3, 3, rng);
    for (bool relu : {false, true}) {
      const auto got = Conv2d(x, l, relu ? Activation::kRelu : Activation::kLinear);
      EXPECT_LT(MaxDiff(got, oracle::Conv(x, l, relu)), 1e-6);
    }
  }
  // 1x1 kernels take the same path.
  const auto x = oracle::RandomTensor(8, 3, 4, rng);
  const auto l = MakeLayer(LayerKind::kConv, 4, 1, 1, 1, rng);
  EXPECT_LT(MaxDiff(Conv2d(x, l, Activation::kLinear), oracle::Conv(x, l, false)), 1e-6);
}

TEST(Conv2dTest, FloatMatchesOracle) {
  std::mt19937_64 rng(32);
  const auto x = oracle::RandomTensor(16, 8, 3, rng);
  const auto l = MakeLayer(LayerKind::kConv, 3, 5, 3, 3, rng);
  Tensor<float> xf(16, 8, 3);
  for (std::size_t i = 0; i < x.size(); ++i) xf.data()[i] = static_cast<float>(x.data()[i]);
  ConvLayer<float> lf{l.spec, {l.kernel.begin(), l.kernel.end()}, {l.bias.begin(), l.bias.end()}};
  const auto got = Conv2d(xf, lf, Activation::kRelu);
  const auto want = oracle::Conv(x, l, true);
  for (std::size_t i = 0; i < want.size(); ++i) {
    EXPECT_NEAR(got.data()[i], want.data()[i], 1e-4);
  }
}

TEST(Conv2dTest, RejectsChannelMismatch) {
  std::mt19937_64 rng(33);
  const auto x = oracle::RandomTensor(4, 4, 2, rng);
  const auto l = MakeLayer(LayerKind::kConv, 3, 1, 3, 3, rng);
  EXPECT_THROW(Conv2d(x, l, Activation::kLinear), std::invalid_argument);
}

// ------------------------------------------------------------ pooling

TEST(MaxPoolTest, HalvesFrequencyOnly) {
  const Tensor<double> x(160, 32, 3, 0.5);
  const auto y = MaxPoolFreq(x);
  EXPECT_EQ(y.freq(), 80u);
  EXPECT_EQ(y.time(), 32u);
  EXPECT_EQ(y.channels(), 3u);
}

TEST(MaxPoolTest, TakesLargerOfPair) {
  Tensor<double> x(2, 1, 1);
  x(0, 0, 0) = 1.0;
  x(1, 0, 0) = 5.0;
  EXPECT_EQ(MaxPoolFreq(x)(0, 0, 0), 5.0);
}

TEST(MaxPoolTest, MatchesOracle) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = oracle::RandomTensor(2 * (1 + trial % 5), 3 + trial % 4, 1 + trial % 3, rng);
    EXPECT_EQ(MaxDiff(MaxPoolFreq(x), oracle::MaxPool(x)), 0.0);
  }
}

TEST(MaxPoolTest, RejectsOddFrequency) {
  const Tensor<double> x(5, 4, 1);
  EXPECT_THROW(MaxPoolFreq(x), std::invalid_argument);
}

// ------------------------------------------------------------ upsampling

TEST(UpsampleTest, ShapeArithmetic) {
  std::mt19937_64 rng(35);
  const Tensor<float> x(20, 32, 128, 0.1f);
  ConvLayer<float> l;
  l.spec = {"up", LayerKind::kUpsample, 128, 64, 2, 1, Activation::kLinear};
  l.kernel.assign(l.spec.kernel_elements(), 0.01f);
  l.bias.assign(64, 0.0f);
  const auto y = UpsampleFreq(x, l);
  EXPECT_EQ(y.freq(), 40u);
  EXPECT_EQ(y.time(), 32u);
  EXPECT_EQ(y.channels(), 64u);
}

TEST(UpsampleTest, OnesKernelSpreadsConstant) {
  const Tensor<double> x(4, 3, 1, 2.5);
  ConvLayer<double> l;
  l.spec = {"up", LayerKind::kUpsample, 1, 1, 2, 1, Activation::kLinear};
  l.kernel = {1.0, 1.0};
  l.bias = {0.0};
  const auto y = UpsampleFreq(x, l);
  for (double v : y.data()) EXPECT_EQ(v, 2.5);
}

TEST(UpsampleTest, ZeroInputGivesBias) {
  std::mt19937_64 rng(36);
  const Tensor<double> x(3, 2, 2);
  const auto l = MakeLayer(LayerKind::kUpsample, 2, 3, 2, 1, rng);
  const auto y = UpsampleFreq(x, l);
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t f = 0; f < 6; ++f)
      for (std::size_t t = 0; t < 2; ++t) EXPECT_EQ(y(f, t, o), l.bias[o]);
}

TEST(UpsampleTest, MatchesScatterOracle) {
  std::mt19937_64 rng(37);
  for (int trial = 0; trial < 10; ++trial) {
    const int in = 1 + trial % 4, out = 1 + trial % 3;
    const auto x = oracle::RandomTensor(2 + trial % 3, 4, static_cast<std::size_t>(in), rng);
    const auto l = MakeLayer(LayerKind::kUpsample, in, out, 2, 1, rng);
    EXPECT_LT(MaxDiff(UpsampleFreq(x, l), oracle::Upsample(x, l)), 1e-6);
  }
}

// ------------------------------------------------------------ residual block

std::vector<ConvLayer<double>> BlockLayers(int in, int filters, ResidualConfig config,
                                           int depth, std::mt19937_64& rng) {
  std::vector<ConvLayer<double>> layers;
  layers.push_back(MakeLayer(LayerKind::kConv, in, filters, 3, 3, rng));
  for (int j = 0; j < depth; ++j) layers.push_back(MakeLayer(LayerKind::kConv, filters, filters, 3, 3, rng));
  if (config == ResidualConfig::kConf2) {
    layers.push_back(MakeLayer(LayerKind::kConv, filters, filters, 3, 3, rng));
  }
  return layers;
}

TEST(ResidualBlockTest, ZeroWeightsGiveZero) {
  std::mt19937_64 rng(38);
  auto layers = BlockLayers(2, 3, ResidualConfig::kConf1, 2, rng);
  for (auto& l : layers) {
    std::fill(l.kernel.begin(), l.kernel.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
  const auto x = oracle::RandomTensor(4, 4, 2, rng);
  const auto y = ResidualBlock<double>(x, layers, ResidualConfig::kConf1, 2);
  for (double v : y.data()) EXPECT_EQ(v, 0.0);
}

TEST(ResidualBlockTest, ZeroStackLeavesShortcut) {
  std::mt19937_64 rng(39);
  auto layers = BlockLayers(2, 3, ResidualConfig::kConf1, 2, rng);
  for (std::size_t j = 1; j < layers.size(); ++j) {
    std::fill(layers[j].kernel.begin(), layers[j].kernel.end(), 0.0);
    std::fill(layers[j].bias.begin(), layers[j].bias.end(), 0.0);
  }
  const auto x = oracle::RandomTensor(4, 4, 2, rng);
  const auto a = oracle::Conv(x, layers[0], true);
  EXPECT_LT(MaxDiff(ResidualBlock<double>(x, layers, ResidualConfig::kConf1, 2), a), 1e-12);
}

TEST(ResidualBlockTest, MatchesComposedConvolutions) {
  std::mt19937_64 rng(40);
  for (auto config : {ResidualConfig::kConf1, ResidualConfig::kConf2}) {
    for (int depth : {1, 2, 3}) {
      const auto layers = BlockLayers(3, 4, config, depth, rng);
      const auto x = oracle::RandomTensor(6, 5, 3, rng);
      const auto a = oracle::Conv(x, layers[0], true);
      auto h = a;
      for (int j = 0; j < depth; ++j) h = oracle::Conv(h, layers[1 + static_cast<std::size_t>(j)], true);
      const auto shortcut = config == ResidualConfig::kConf2
                                ? oracle::Conv(a, layers.back(), false)
                                : a;
      const auto want = oracle::Sum(h, shortcut);
      EXPECT_LT(MaxDiff(ResidualBlock<double>(x, layers, config, depth), want), 1e-6);
    }
  }
}

// ------------------------------------------------------------ forward

TEST(ForwardTest, ZeroWeightsGiveZeroOutput) {
  const auto w = ZeroWeights(DefaultTopology());
  std::mt19937_64 rng(41);
  Tensor<float> x(160, 32, 2, 0.3f);
  UNetInference net(w, Precision::kFp32);
  Tensor<float> y;
  net.Run(x, &y);
  ASSERT_EQ(y.freq(), 160u);
  ASSERT_EQ(y.time(), 32u);
  ASSERT_EQ(y.channels(), 1u);
  for (float v : y.data()) EXPECT_EQ(v, 0.0f);
}

TEST(ForwardTest, TinyNetMatchesCompositionOracle) {
  std::mt19937_64 rng(42);
  for (auto config : {ResidualConfig::kConf1, ResidualConfig::kConf2}) {
    for (int depth : {1, 2}) {
      const auto topo = Tiny(config, 2, depth);
      const auto p = RandomParams(topo, 7 + static_cast<std::uint64_t>(depth));
      const auto x = UniformInput(8, 4, rng);
      EXPECT_LT(MaxDiff(Forward(p, x), oracle::Forward(p, x, true)), 1e-6);
      EXPECT_LT(MaxDiff(Forward(p, x, OutputMode::kLinear), oracle::Forward(p, x, false)), 1e-6);
    }
  }
}

TEST(ForwardTest, ThreeLevelNetMatchesOracle) {
  std::mt19937_64 rng(43);
  NetTopology topo = Tiny(ResidualConfig::kConf2, 3, 2);
  topo.num_encoders = 3;
  topo.num_decoders = 2;
  const auto p = RandomParams(topo, 11);
  const auto x = UniformInput(16, 6, rng);
  EXPECT_LT(MaxDiff(Forward(p, x), oracle::Forward(p, x, true)), 1e-6);
}

TEST(ForwardTest, FullSizeShapeAndFiniteOutput) {
  const auto w = RandomWeights(DefaultTopology(), 3);
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Tensor<float> x(160, 32, 2);
  for (float& v : x.data()) v = u(rng);
  UNetInference net(w, Precision::kFp32);
  Tensor<float> y;
  net.Run(x, &y);
  EXPECT_EQ(y.freq(), 160u);
  EXPECT_EQ(y.time(), 32u);
  EXPECT_EQ(y.channels(), 1u);
  EXPECT_TRUE(y.AllFinite());
  for (float v : y.data()) EXPECT_GE(v, 0.0f);
}

TEST(ForwardTest, InferenceMatchesReferenceForward) {
  std::mt19937_64 rng(45);
  NetTopology topo = Tiny(ResidualConfig::kConf1, 4, 2);
  const auto w = RandomWeights(topo, 5);
  const auto pd = CastParams<double>(w.params);
  const auto x = UniformInput(32, 32, rng);
  Tensor<float> xf(32, 32, 2);
  for (std::size_t i = 0; i < x.size(); ++i) xf.data()[i] = static_cast<float>(x.data()[i]);
  UNetInference net(w, Precision::kFp32);
  Tensor<float> y;
  net.Run(xf, &y);
  const auto want = oracle::Forward(pd, x, true);
  for (std::size_t i = 0; i < want.size(); ++i) EXPECT_NEAR(y.data()[i], want.data()[i], 1e-4);
}

TEST(ForwardTest, RejectsBadShape) {
  const auto p = RandomParams(Tiny(ResidualConfig::kConf1), 1);
  EXPECT_THROW(Forward(p, Tensor<double>(6, 4, 2)), std::invalid_argument);  // 6 % 8 != 0
  EXPECT_THROW(Forward(p, Tensor<double>(8, 4, 3)), std::invalid_argument);
  UNetInference net(RandomWeights(DefaultTopology(), 1), Precision::kFp32);
  Tensor<float> y;
  EXPECT_THROW(net.Run(Tensor<float>(100, 32, 2), &y), std::invalid_argument);
}

TEST(ForwardTest, BitReproducible) {
  const auto w = RandomWeights(DefaultTopology(), 9);
  Tensor<float> x(160, 32, 2);
  std::mt19937_64 rng(46);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  for (float& v : x.data()) v = u(rng);
  for (Precision p : {Precision::kFp32, Precision::kFp16}) {
    UNetInference a(w, p), b(w, p);
    Tensor<float> ya, yb, ya2;
    a.Run(x, &ya);
    b.Run(x, &yb);
    a.Run(x, &ya2);
    EXPECT_EQ(ya, yb);
    EXPECT_EQ(ya, ya2);
  }
}

// ------------------------------------------------------------ param count

TEST(ParamCountTest, SingleLayers) {
  const LayerSpec conv{"c", LayerKind::kConv, 2, 16, 3, 3, Activation::kRelu};
  EXPECT_EQ(conv.param_count(), 304u);
  const LayerSpec out{"o", LayerKind::kConv, 16, 1, 1, 1, Activation::kLinear};
  EXPECT_EQ(out.param_count(), 17u);
}

TEST(ParamCountTest, MatchesHandEnumeration) {
  for (int enc : {3, 4}) {
    for (int f0 : {8, 16}) {
      for (bool conf2 : {false, true}) {
        for (int depth : {1, 2}) {
          NetTopology t;
          t.num_encoders = enc;
          t.num_decoders = enc - 1;
          t.base_filters = f0;
          t.residual_config = conf2 ? ResidualConfig::kConf2 : ResidualConfig::kConf1;
          t.residual_depth = depth;
          EXPECT_EQ(ParamCount(t), oracle::ParamCount(enc, f0, conf2, depth));
          EXPECT_EQ(RandomWeights(t, 0).params.param_count(), ParamCount(t));
        }
      }
    }
  }
}

TEST(TopologyTest, FiltersDoublePerLevelAndDecodersTrail) {
  const NetTopology t = DefaultTopology();
  EXPECT_EQ(t.FiltersAt(0), 16);
  EXPECT_EQ(t.FiltersAt(3), 128);
  NetTopology bad = t;
  bad.num_decoders = 2;
  EXPECT_THROW(bad.Validate(), std::invalid_argument);
}

// ------------------------------------------------------------ fp16

TEST(Fp16Test, RepresentableAndUnderflow) {
  EXPECT_EQ(RoundToHalf(1.0f), 1.0f);
  EXPECT_EQ(RoundToHalf(-2.0f), -2.0f);
  EXPECT_EQ(RoundToHalf(65504.0f), 65504.0f);
  EXPECT_EQ(RoundToHalf(1e-8f), 0.0f);
}

TEST(Fp16Test, MatchesExhaustiveNearestSearch) {
  std::mt19937_64 rng(47);
  std::uniform_real_distribution<double> exponent(-27.0, 17.0);
  std::vector<float> values{0.0f, 1.0f / 3.0f, 65519.0f, 65520.0f, 1e6f,
                            5.960464477539063e-8f, 2.98023223876953125e-8f,
                            1.0f + 1.0f / 2048.0f, 1.0f + 3.0f / 2048.0f};
  for (int i = 0; i < 150; ++i) {
    const float v = static_cast<float>(std::exp2(exponent(rng)));
    values.push_back((i % 2) ? v : -v);
  }
  for (float v : values) {
    bool saturated = false;
    const float got = RoundToHalf(v, &saturated);
    EXPECT_EQ(static_cast<double>(got), oracle::NearestHalf(v)) << "value " << v;
    // Only values that round past the largest half (>= 65520) saturate.
    EXPECT_EQ(saturated, std::abs(v) >= 65520.0f) << "value " << v;
  }
}

TEST(Fp16Test, QuantizeSaturatesAndHalvesStorage) {
  auto w = RandomWeights(Tiny(ResidualConfig::kConf1), 2);
  w.params.layers[0].kernel[0] = 1e6f;
  w.params.layers[0].kernel[1] = -7e4f;
  const auto q = QuantizeFp16(w);
  EXPECT_EQ(q.precision, Precision::kFp16);
  EXPECT_EQ(q.saturated_count, 2u);
  EXPECT_EQ(q.params.layers[0].kernel[0], 65504.0f);
  EXPECT_EQ(q.params.layers[0].kernel[1], -65504.0f);
  EXPECT_EQ(q.storage_bytes() * 2, w.storage_bytes());
  q.params.ForEach([](float v) { EXPECT_EQ(v, RoundToHalf(v)); });
}

TEST(Fp16Test, ForwardCloseToFp32) {
  const auto w = RandomWeights(DefaultTopology(), 4);
  UNetInference full(w, Precision::kFp32), half(w, Precision::kFp16);
  std::mt19937_64 rng(48);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Tensor<float> x(160, 32, 2), a, b;
  for (int trial = 0; trial < 3; ++trial) {
    for (float& v : x.data()) v = u(rng);
    full.Run(x, &a);
    half.Run(x, &b);
    ASSERT_TRUE(b.AllFinite());
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      num += std::pow(double{a.data()[i]} - b.data()[i], 2);
      den += std::pow(double{a.data()[i]}, 2);
    }
    const double rel = std::sqrt(num / den);
    RecordProperty("fp16_relative_rms_" + std::to_string(trial), std::to_string(rel));
    EXPECT_LT(rel, 1e-2);
  }
}

// ------------------------------------------------------------ weight files

class WeightFileTest : public ::testing::Test {
 protected:
  std::filesystem::path Path(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / "unetaec_weights_test";
    std::filesystem::create_directories(dir);
    return dir / name;
  }
};

TEST_F(WeightFileTest, RoundTripIsBitIdentical) {
  NetTopology t = DefaultTopology();
  t.residual_config = ResidualConfig::kConf2;
  const auto w = RandomWeights(t, 12);
  SaveWeights(w, Path("a.bin"));
  const auto back = LoadWeights(Path("a.bin"));
  EXPECT_EQ(back.topology(), w.topology());
  EXPECT_EQ(back.precision, Precision::kFp32);
  ASSERT_EQ(back.params.layers.size(), w.params.layers.size());
  for (std::size_t i = 0; i < w.params.layers.size(); ++i) {
    EXPECT_EQ(back.params.layers[i].kernel, w.params.layers[i].kernel);
    EXPECT_EQ(back.params.layers[i].bias, w.params.layers[i].bias);
  }
}

TEST_F(WeightFileTest, Fp16TagPreserved) {
  const auto q = QuantizeFp16(RandomWeights(Tiny(ResidualConfig::kConf1), 13));
  SaveWeights(q, Path("h.bin"));
  const auto back = LoadWeights(Path("h.bin"));
  EXPECT_EQ(back.precision, Precision::kFp16);
  for (std::size_t i = 0; i < q.params.layers.size(); ++i) {
    EXPECT_EQ(back.params.layers[i].kernel, q.params.layers[i].kernel);
  }
  EXPECT_LT(std::filesystem::file_size(Path("h.bin")),
            q.params.param_count() * 4);
}

TEST_F(WeightFileTest, TruncatedAndCorruptFilesAreRejected) {
  const auto w = RandomWeights(Tiny(ResidualConfig::kConf1), 14);
  SaveWeights(w, Path("t.bin"));
  const auto size = std::filesystem::file_size(Path("t.bin"));
  std::filesystem::resize_file(Path("t.bin"), size - 3);
  EXPECT_THROW(LoadWeights(Path("t.bin")), FormatError);

  SaveWeights(w, Path("m.bin"));
  {
    std::fstream f(Path("m.bin"), std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.put('X');
  }
  EXPECT_THROW(LoadWeights(Path("m.bin")), FormatError);
  EXPECT_THROW(LoadWeights(Path("does_not_exist.bin")), std::runtime_error);
}

}  // namespace
}  // namespace unetaec
