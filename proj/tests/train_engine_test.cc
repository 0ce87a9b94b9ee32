#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.h"
#include "unetaec/stft.h"
#include "unetaec/synth.h"
#include "unetaec/train.h"
#include "unetaec/unet.h"

namespace unetaec {
namespace {

Tensor<double> RandomGrid(std::size_t f, std::size_t t, std::mt19937_64& rng) {
  return oracle::RandomTensor(f, t, 1, rng);
}

// ------------------------------------------------------------ loss

TEST(SpectralLossTest, EqualInputsGiveZero) {
  std::mt19937_64 rng(50);
  const auto s = RandomGrid(160, 32, rng);
  EXPECT_EQ(SpectralLoss(s, s, LossConfig{}), 0.0);
}

TEST(SpectralLossTest, UnitDifferenceOnScoredFramesGivesOne) {
  Tensor<double> a(160, 32, 1), b(160, 32, 1);
  for (std::size_t f = 0; f < 160; ++f)
    for (std::size_t t = 24; t < 32; ++t) a(f, t, 0) = 1.0;
  EXPECT_DOUBLE_EQ(SpectralLoss(a, b, LossConfig{}), 1.0);
}

TEST(SpectralLossTest, MatchesDirectFormula) {
  std::mt19937_64 rng(51);
  const auto a = RandomGrid(160, 32, rng), b = RandomGrid(160, 32, rng);
  double sum = 0.0;
  for (std::size_t f = 0; f < 160; ++f)
    for (std::size_t t = 24; t < 32; ++t) sum += std::pow(a(f, t, 0) - b(f, t, 0), 2);
  EXPECT_NEAR(SpectralLoss(a, b, LossConfig{}), std::sqrt(sum / (8.0 * 160.0)), 1e-12);
}

TEST(SpectralLossTest, IgnoresFramesBeforeTheNewestStride) {
  std::mt19937_64 rng(52);
  std::normal_distribution<double> n(0.0, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto est = RandomGrid(160, 32, rng), target = RandomGrid(160, 32, rng);
    const double base = SpectralLoss(est, target, LossConfig{});
    auto outside = est;
    for (std::size_t f = 0; f < 160; ++f)
      for (std::size_t t = 0; t < 24; ++t) outside(f, t, 0) += n(rng);
    EXPECT_EQ(SpectralLoss(outside, target, LossConfig{}), base);
    auto inside = est;
    inside(static_cast<std::size_t>(trial * 7 % 160), 24 + static_cast<std::size_t>(trial % 8), 0) += 0.5;
    EXPECT_NE(SpectralLoss(inside, target, LossConfig{}), base);
  }
}

TEST(SpectralLossTest, RejectsBadShapes) {
  const Tensor<double> a(160, 32, 1), b(160, 31, 1), c(8, 4, 1);
  EXPECT_THROW(SpectralLoss(a, b, LossConfig{}), std::invalid_argument);
  EXPECT_THROW(SpectralLoss(c, c, LossConfig{}), std::invalid_argument);  // 8 frames > 4
  LossConfig two{2};
  EXPECT_NO_THROW(SpectralLoss(c, c, two));
}

TEST(SpectralLossTest, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(53);
  auto est = RandomGrid(16, 12, rng);
  const auto target = RandomGrid(16, 12, rng);
  Tensor<double> grad(16, 12, 1);
  SpectralLossGradient(est, target, LossConfig{}, &grad);
  for (std::size_t i = 0; i < est.size(); ++i) {
    const double fd = oracle::CentralDifference(
        [&] { return SpectralLoss(est, target, LossConfig{}); }, &est.data()[i], 1e-6);
    EXPECT_NEAR(grad.data()[i], fd, 1e-7);
  }
}

// ------------------------------------------------------------ backward

NetTopology TinyTopology(ResidualConfig config) {
  NetTopology t;
  t.base_filters = 2;
  t.residual_depth = 1;
  t.residual_config = config;
  return t;
}

NetParams<double> TinyParams(ResidualConfig config, std::uint64_t seed) {
  auto p = CastParams<double>(RandomWeights(TinyTopology(config), seed).params);
  std::mt19937_64 rng(seed + 1000);
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& l : p.layers)
    for (double& b : l.bias) b = n(rng);
  return p;
}

double NetLoss(const NetParams<double>& p, const Tensor<double>& x,
               const Tensor<double>& target, const LossConfig& cfg) {
  return SpectralLoss(Forward(p, x, OutputMode::kLinear), target, cfg);
}

NetParams<double> Gradients(const NetParams<double>& p, const Tensor<double>& x,
                            const Tensor<double>& target, const LossConfig& cfg) {
  Tape<double> tape(p);
  const auto& out = tape.Forward(x);
  Tensor<double> g(out.freq(), out.time(), 1);
  SpectralLossGradient(out, target, cfg, &g);
  auto grads = NetParams<double>::Zeros(p.topology);
  tape.Backward(g, &grads);
  return grads;
}

TEST(BackwardTest, EveryWeightMatchesCentralDifferences) {
  const LossConfig cfg{2};
  for (auto config : {ResidualConfig::kConf1, ResidualConfig::kConf2}) {
    std::mt19937_64 rng(54);
    auto p = TinyParams(config, 3);
    const auto x = oracle::RandomTensor(8, 4, 2, rng, 0.5);
    const auto target = oracle::RandomTensor(8, 4, 1, rng, 0.5);
    const auto grads = Gradients(p, x, target, cfg);
    std::size_t checked = 0, failed = 0;
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      auto check = [&](double* w, double analytic) {
        const double fd = oracle::CentralDifference(
            [&] { return NetLoss(p, x, target, cfg); }, w, 1e-4);
        ++checked;
        if (oracle::RelativeError(analytic, fd) > 1e-4) ++failed;
      };
      for (std::size_t i = 0; i < p.layers[l].kernel.size(); ++i) {
        check(&p.layers[l].kernel[i], grads.layers[l].kernel[i]);
      }
      for (std::size_t i = 0; i < p.layers[l].bias.size(); ++i) {
        check(&p.layers[l].bias[i], grads.layers[l].bias[i]);
      }
    }
    EXPECT_EQ(checked, p.param_count());
    EXPECT_EQ(failed, 0u) << ToString(config);
  }
}

TEST(BackwardTest, ZeroLossGivesZeroGradients) {
  std::mt19937_64 rng(55);
  const auto p = TinyParams(ResidualConfig::kConf1, 4);
  const auto x = oracle::RandomTensor(8, 4, 2, rng);
  const auto target = Forward(p, x, OutputMode::kLinear);
  const auto grads = Gradients(p, x, target, LossConfig{2});
  grads.ForEach([](double g) { EXPECT_EQ(g, 0.0); });
}

// d L / d b_out = sum over scored cells of (est - target) / (L * M * K).
TEST(BackwardTest, OutputBiasGradientByHand) {
  std::mt19937_64 rng(56);
  const auto p = TinyParams(ResidualConfig::kConf2, 5);
  const auto x = oracle::RandomTensor(8, 4, 2, rng);
  const auto target = oracle::RandomTensor(8, 4, 1, rng);
  const LossConfig cfg{3};
  const auto est = Forward(p, x, OutputMode::kLinear);
  const double loss = SpectralLoss(est, target, cfg);
  double sum = 0.0;
  for (std::size_t f = 0; f < 8; ++f)
    for (std::size_t t = 1; t < 4; ++t) sum += est(f, t, 0) - target(f, t, 0);
  const double want = sum / (loss * 3.0 * 8.0);
  const auto grads = Gradients(p, x, target, cfg);
  EXPECT_NEAR(grads.layers.back().bias[0], want, 1e-10);
}

// ------------------------------------------------------------ optimizers

NetParams<double> Scalars(double w, double b) {
  NetParams<double> p;
  ConvLayer<double> l;
  l.spec = {"s", LayerKind::kConv, 1, 1, 1, 1, Activation::kLinear};
  l.kernel = {w};
  l.bias = {b};
  p.layers.push_back(l);
  return p;
}

TEST(OptimizerTest, SgdStep) {
  OptimizerConfig cfg;
  cfg.kind = OptimizerKind::kSgd;
  cfg.learning_rate = 0.1;
  Optimizer<double> opt(cfg, 2);
  auto p = Scalars(1.0, 0.0);
  opt.Step(Scalars(0.5, 0.0), &p);
  EXPECT_DOUBLE_EQ(p.layers[0].kernel[0], 0.95);
  EXPECT_EQ(p.layers[0].bias[0], 0.0);
}

TEST(OptimizerTest, AdamFirstStepMovesByLearningRate) {
  for (double c : {0.3, -2.0, 1e3}) {
    OptimizerConfig cfg;
    cfg.kind = OptimizerKind::kAdam;
    cfg.learning_rate = 1e-3;
    Optimizer<double> opt(cfg, 2);
    auto p = Scalars(0.0, 0.0);
    opt.Step(Scalars(c, c), &p);
    EXPECT_NEAR(p.layers[0].kernel[0], -1e-3 * (c > 0 ? 1 : -1), 1e-6);
  }
}

// Independent trace of both rules over a gradient stream.
TEST(OptimizerTest, AdamAndNadamFollowTheirRules) {
  const double lr = 0.01, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  const std::vector<double> stream{0.5, -0.2, 0.8, 0.1, -0.7, 0.3};
  for (auto kind : {OptimizerKind::kAdam, OptimizerKind::kNadam}) {
    OptimizerConfig cfg;
    cfg.kind = kind;
    cfg.learning_rate = lr;
    Optimizer<double> opt(cfg, 2);
    auto p = Scalars(1.0, 0.0);
    double w = 1.0, m = 0.0, v = 0.0;
    for (std::size_t t = 1; t <= stream.size(); ++t) {
      const double g = stream[t - 1];
      m = b1 * m + (1 - b1) * g;
      v = b2 * v + (1 - b2) * g * g;
      const double vhat = v / (1 - std::pow(b2, static_cast<double>(t)));
      double mterm = m / (1 - std::pow(b1, static_cast<double>(t)));
      if (kind == OptimizerKind::kNadam) {
        mterm = b1 * m / (1 - std::pow(b1, static_cast<double>(t + 1))) +
                (1 - b1) * g / (1 - std::pow(b1, static_cast<double>(t)));
      }
      w -= lr * mterm / (std::sqrt(vhat) + eps);
      opt.Step(Scalars(g, 0.0), &p);
      EXPECT_NEAR(p.layers[0].kernel[0], w, 1e-12) << ToString(kind) << " step " << t;
    }
    EXPECT_EQ(opt.steps(), static_cast<std::int64_t>(stream.size()));
  }
}

TEST(OptimizerTest, NadamAddsNesterovTerm) {
  OptimizerConfig adam_cfg, nadam_cfg;
  adam_cfg.kind = OptimizerKind::kAdam;
  nadam_cfg.kind = OptimizerKind::kNadam;
  Optimizer<double> adam(adam_cfg, 2), nadam(nadam_cfg, 2);
  auto pa = Scalars(0.0, 0.0), pn = Scalars(0.0, 0.0);
  for (double g : {1.0, 1.0, -0.5}) {
    adam.Step(Scalars(g, 0.0), &pa);
    nadam.Step(Scalars(g, 0.0), &pn);
    EXPECT_NE(pa.layers[0].kernel[0], pn.layers[0].kernel[0]);
  }
}

TEST(OptimizerTest, RejectsNonFiniteGradientsWithoutTouchingWeights) {
  for (auto kind : {OptimizerKind::kSgd, OptimizerKind::kAdam, OptimizerKind::kNadam}) {
    OptimizerConfig cfg;
    cfg.kind = kind;
    Optimizer<double> opt(cfg, 2);
    auto p = Scalars(1.0, 2.0);
    EXPECT_THROW(opt.Step(Scalars(0.1, std::numeric_limits<double>::quiet_NaN()), &p),
                 std::invalid_argument);
    EXPECT_THROW(opt.Step(Scalars(std::numeric_limits<double>::infinity(), 0.0), &p),
                 std::invalid_argument);
    EXPECT_EQ(p.layers[0].kernel[0], 1.0);
    EXPECT_EQ(p.layers[0].bias[0], 2.0);
    EXPECT_EQ(opt.steps(), 0);
  }
}

TEST(OptimizerTest, MomentsStayFiniteUnderBoundedGradients) {
  std::mt19937_64 rng(57);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  for (auto kind : {OptimizerKind::kAdam, OptimizerKind::kNadam}) {
    OptimizerConfig cfg;
    cfg.kind = kind;
    Optimizer<double> opt(cfg, 2);
    auto p = Scalars(0.0, 0.0);
    for (int i = 0; i < 2000; ++i) {
      opt.Step(Scalars(u(rng), i % 3 == 0 ? 0.0 : u(rng)), &p);
    }
    for (double v : opt.first_moment()) EXPECT_TRUE(std::isfinite(v));
    for (double v : opt.second_moment()) EXPECT_TRUE(std::isfinite(v));
    p.ForEach([](double v) { EXPECT_TRUE(std::isfinite(v)); });
  }
}

TEST(OptimizerTest, ParsesKinds) {
  EXPECT_EQ(ParseOptimizerKind("nadam"), OptimizerKind::kNadam);
  EXPECT_EQ(ParseOptimizerKind("sgd"), OptimizerKind::kSgd);
  EXPECT_EQ(ParseOptimizerKind("adam"), OptimizerKind::kAdam);
  EXPECT_THROW(ParseOptimizerKind("rmsprop"), std::invalid_argument);
  OptimizerConfig bad;
  bad.learning_rate = -1.0;
  EXPECT_THROW(bad.Validate(), std::invalid_argument);
}

// ------------------------------------------------------------ examples

struct Signals {
  std::vector<double> far, mic, near;
};

Signals MakeSignals(std::uint64_t seed, double seconds = 1.0) {
  const auto n = static_cast<std::size_t>(seconds * kSampleRateHz);
  const auto near = SpeechShapedNoise(n, seed);
  const auto far = SpeechShapedNoise(n, seed + 1);
  MixtureSpec spec;
  spec.rir = GenRir(16.0, 4.0, seed + 2);
  const auto s = Mix(near, far, spec, seed + 3);
  return {s.far_end.samples, s.mic.samples, s.near_end.samples};
}

TEST(ExampleTest, ShapesAndTargetScale) {
  const auto sig = MakeSignals(60);
  const std::span<const double> far(sig.far.data(), kFrameSamples);
  const std::span<const double> mic(sig.mic.data(), kFrameSamples);
  const std::span<const double> near(sig.near.data(), kFrameSamples);
  const auto ex = MakeExample(far, mic, near);
  EXPECT_EQ(ex.input.freq(), 160u);
  EXPECT_EQ(ex.input.time(), 32u);
  EXPECT_EQ(ex.input.channels(), 2u);
  EXPECT_EQ(ex.target.channels(), 1u);
  const auto mic_mag = Magnitude(Stft(mic));
  const auto near_mag = Magnitude(Stft(near));
  double scale = 0.0;
  for (double v : mic_mag.data()) scale = std::max(scale, v);
  for (std::size_t f = 0; f < 160; f += 17) {
    for (std::size_t t = 0; t < 32; t += 5) {
      EXPECT_NEAR(ex.input(f, t, 0), mic_mag(f, t) / scale, 1e-12);
      EXPECT_NEAR(ex.target(f, t, 0), near_mag(f, t) / scale, 1e-12);
    }
  }
}

TEST(ExampleTest, SamplingIsSeededAndCropKeepsNewestFrames) {
  const auto sig = MakeSignals(61);
  const auto a = SampleExamples(sig.far, sig.mic, sig.near, 3, 9);
  const auto b = SampleExamples(sig.far, sig.mic, sig.near, 3, 9);
  ASSERT_EQ(a.size(), 3u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].input, b[i].input);
    EXPECT_EQ(a[i].target, b[i].target);
  }
  const auto c = CropExample(a[0], 8, 8);
  EXPECT_EQ(c.input.freq(), 8u);
  EXPECT_EQ(c.input.time(), 8u);
  EXPECT_EQ(c.input(3, 7, 1), a[0].input(3, 31, 1));
  EXPECT_EQ(c.target(0, 0, 0), a[0].target(0, 24, 0));
  // Short signals are zero padded rather than rejected.
  const std::vector<double> tiny(100, 0.1);
  EXPECT_EQ(SampleExamples(tiny, tiny, tiny, 1, 0).size(), 1u);
}

// ------------------------------------------------------------ training

std::vector<TrainingExample> ToyDataset(std::uint64_t seed, std::size_t count) {
  const auto sig = MakeSignals(seed);
  auto examples = SampleExamples(sig.far, sig.mic, sig.near, count, seed);
  for (auto& e : examples) e = CropExample(e, 8, 8);
  return examples;
}

NetTopology OverfitTopology() {
  NetTopology t;
  t.base_filters = 4;
  t.residual_depth = 1;
  return t;
}

TEST(TrainTest, RejectsEmptyDataset) {
  const std::vector<TrainingExample> empty;
  EXPECT_THROW(Train<float>(empty, OverfitTopology(), OptimizerConfig{}, TrainOptions{}),
               std::invalid_argument);
}

TEST(TrainTest, SameSeedSameCurve) {
  const auto data = ToyDataset(62, 4);
  TrainOptions opts;
  opts.epochs = 5;
  opts.batch = 2;
  opts.seed = 17;
  const auto a = Train<float>(data, OverfitTopology(), OptimizerConfig{}, opts);
  const auto b = Train<float>(data, OverfitTopology(), OptimizerConfig{}, opts);
  EXPECT_EQ(a.epoch_loss, b.epoch_loss);
  EXPECT_EQ(a.final_loss, b.final_loss);
  for (std::size_t l = 0; l < a.params.layers.size(); ++l) {
    EXPECT_EQ(a.params.layers[l].kernel, b.params.layers[l].kernel);
  }
}

TEST(TrainTest, ZeroLearningRateLeavesWeightsUntouched) {
  const auto data = ToyDataset(63, 2);
  const auto init = RandomWeights(OverfitTopology(), 3).params;
  OptimizerConfig opt;
  opt.learning_rate = 0.0;
  TrainOptions opts;
  opts.epochs = 3;
  const auto r = Train<float>(data, init, opt, opts);
  for (std::size_t l = 0; l < init.layers.size(); ++l) {
    EXPECT_EQ(r.params.layers[l].kernel, init.layers[l].kernel);
    EXPECT_EQ(r.params.layers[l].bias, init.layers[l].bias);
  }
}

TEST(TrainTest, SingleSampleOverfit) {
  const auto data = ToyDataset(64, 1);
  OptimizerConfig opt;  // nadam, lr 1e-4
  TrainOptions opts;
  opts.epochs = 500;
  NetTopology topo = OverfitTopology();
  topo.base_filters = 8;
  for (std::uint64_t seed : {0u, 1u}) {
    opts.seed = seed;
    const auto r = Train<float>(data, topo, opt, opts);
    ASSERT_EQ(r.epoch_loss.size(), 500u);
    EXPECT_LT(r.final_loss, 0.1 * r.epoch_loss.front()) << "seed " << seed;
  }
}

// Loss against an all-zero target, averaged over 10-epoch windows, keeps
// falling.
TEST(TrainTest, ZeroTargetConverges) {
  auto data = ToyDataset(65, 2);
  for (auto& e : data) e.target.Fill(0.0);
  const OptimizerConfig opt;
  TrainOptions opts;
  opts.epochs = 300;
  const auto r = Train<double>(data, OverfitTopology(), opt, opts);
  std::vector<double> smooth;
  for (std::size_t i = 0; i + 10 <= r.epoch_loss.size(); i += 10) {
    double s = 0.0;
    for (std::size_t j = i; j < i + 10; ++j) s += r.epoch_loss[j];
    smooth.push_back(s / 10.0);
  }
  for (std::size_t i = 1; i < smooth.size(); ++i) EXPECT_LE(smooth[i], smooth[i - 1]);
  EXPECT_LT(r.final_loss, 0.1 * r.epoch_loss.front());
}

// ------------------------------------------------------------ search

TEST(SearchTest, GridHasSeventyTwoDistinctPoints) {
  const SearchSpace space;
  EXPECT_EQ(space.size(), 72u);
  const auto all = space.Enumerate();
  std::set<std::tuple<int, double, int, int, int>> seen;
  for (const auto& c : all) {
    seen.insert({static_cast<int>(c.optimizer), c.learning_rate, c.num_encoders,
                 static_cast<int>(c.residual), c.base_filters});
    EXPECT_EQ(c.ToTopology(2).num_decoders, c.num_encoders - 1);
  }
  EXPECT_EQ(seen.size(), 72u);
}

class SearchRunTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    train_ = new std::vector<TrainingExample>(ToyDataset(66, 2));
    val_ = new std::vector<TrainingExample>(ToyDataset(67, 1));
  }
  static void TearDownTestSuite() {
    delete train_;
    delete val_;
  }
  static std::vector<TrainingExample>* train_;
  static std::vector<TrainingExample>* val_;
};
std::vector<TrainingExample>* SearchRunTest::train_ = nullptr;
std::vector<TrainingExample>* SearchRunTest::val_ = nullptr;

TEST_F(SearchRunTest, ExhaustiveBudgetTrainsEveryPointOnceInRankOrder) {
  SearchOptions opts;
  opts.budget = 72;
  opts.epochs = 1;
  opts.seed = 5;
  const auto ranked = RandomSearch(SearchSpace{}, *train_, *val_, opts);
  ASSERT_EQ(ranked.size(), 72u);
  std::set<std::size_t> indices;
  for (const auto& r : ranked) indices.insert(r.grid_index);
  EXPECT_EQ(indices.size(), 72u);
  for (std::size_t i = 1; i < ranked.size(); ++i) {
    EXPECT_LE(ranked[0].validation_loss, ranked[i].validation_loss);
    EXPECT_LE(ranked[i - 1].validation_loss, ranked[i].validation_loss);
  }
}

TEST_F(SearchRunTest, FixedSeedGivesIdenticalRanking) {
  SearchOptions opts;
  opts.budget = 6;
  opts.epochs = 2;
  opts.seed = 8;
  const auto a = RandomSearch(SearchSpace{}, *train_, *val_, opts);
  const auto b = RandomSearch(SearchSpace{}, *train_, *val_, opts);
  ASSERT_EQ(a.size(), 6u);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].grid_index, b[i].grid_index);
    EXPECT_EQ(a[i].validation_loss, b[i].validation_loss);
  }
  std::ostringstream report;
  WriteSearchReport(report, a);
  const std::string text = report.str();
  EXPECT_EQ(text.rfind("rank,", 0), 0u);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 7);
}

TEST_F(SearchRunTest, RejectsBadBudget) {
  SearchOptions opts;
  opts.budget = 0;
  EXPECT_THROW(RandomSearch(SearchSpace{}, *train_, *val_, opts), std::invalid_argument);
  opts.budget = 73;
  EXPECT_THROW(RandomSearch(SearchSpace{}, *train_, *val_, opts), std::invalid_argument);
}

}  // namespace
}  // namespace unetaec
