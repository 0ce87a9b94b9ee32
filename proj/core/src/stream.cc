#include "unetaec/stream.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "unetaec/common.h"
#include "unetaec/random.h"
#include "unetaec/synth.h"

namespace unetaec {
namespace {

using Clock = std::chrono::steady_clock;

double Ms(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

void SplitInto(const ComplexSpectrogram& spec, RealGrid* magnitude,
               RealGrid* phase) {
  const auto src = spec.bins.data();
  auto mag = magnitude->data();
  for (std::size_t i = 0; i < src.size(); ++i) mag[i] = std::abs(src[i]);
  if (phase == nullptr) return;
  auto ph = phase->data();
  for (std::size_t i = 0; i < src.size(); ++i) {
    ph[i] = mag[i] == 0.0 ? 0.0 : std::arg(src[i]);
  }
}

TimingStats Stats(std::vector<double> values) {
  TimingStats stats;
  if (values.empty()) return stats;
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  const std::size_t n = values.size();
  stats.mean = sum / static_cast<double>(n);
  stats.median = n % 2 == 1 ? values[n / 2]
                            : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  stats.p95 = values[std::max<std::size_t>(rank, 1) - 1];
  return stats;
}

}  // namespace

void IdentityModel::Run(const RealGrid& mic, const RealGrid& /*far*/,
                        RealGrid* estimate) {
  auto src = mic.data();
  auto dst = estimate->data();
  std::copy(src.begin(), src.end(), dst.begin());
}

UNetModel::UNetModel(const NetWeights& weights, Precision compute)
    : net_(weights, compute),
      input_(kNumBins, kNumFrames, 2),
      output_(kNumBins, kNumFrames, 1) {
  CheckInputShape(weights.topology(), kNumBins, kNumFrames, 2);
}

void UNetModel::Run(const RealGrid& mic, const RealGrid& far,
                    RealGrid* estimate) {
  auto m = mic.data();
  auto f = far.data();
  auto in_mic = input_.plane(0);
  auto in_far = input_.plane(1);
  for (std::size_t i = 0; i < m.size(); ++i) {
    in_mic[i] = static_cast<float>(m[i]);
    in_far[i] = static_cast<float>(f[i]);
  }
  net_.Run(input_, &output_);
  auto out = output_.plane(0);
  auto dst = estimate->data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = out[i];
}

LatencyBreakdown Summarize(std::span<const StageTimes> times) {
  auto collect = [&](double StageTimes::*field) {
    std::vector<double> values;
    values.reserve(times.size());
    for (const auto& t : times) values.push_back(t.*field);
    return Stats(std::move(values));
  };
  LatencyBreakdown out;
  out.get_buffer = collect(&StageTimes::get_buffer_ms);
  out.data_preparation = collect(&StageTimes::data_preparation_ms);
  out.model_inference = collect(&StageTimes::model_inference_ms);
  out.data_extraction = collect(&StageTimes::data_extraction_ms);
  out.total = collect(&StageTimes::total_ms);
  out.samples = times.size();
  return out;
}

StreamProcessor::StreamProcessor(std::unique_ptr<SpectralModel> model)
    : model_(std::move(model)),
      mic_mag_(kNumBins, kNumFrames),
      mic_phase_(kNumBins, kNumFrames),
      far_mag_(kNumBins, kNumFrames),
      estimate_(kNumBins, kNumFrames) {
  Require(model_ != nullptr, "stream: null model");
  mic_norm_.grid.Resize(kNumBins, kNumFrames);
  far_norm_.grid.Resize(kNumBins, kNumFrames);
}

void StreamProcessor::ProcessStride(std::span<const double> far,
                                    std::span<const double> mic,
                                    std::span<double> out, StageTimes* times) {
  Require(out.size() == kStrideSamples, "stream: output stride must be 640 samples");
  const auto t0 = Clock::now();
  const FrameAssembler::Frames frames = assembler_.PushStride(far, mic);
  const auto t1 = Clock::now();

  stft_.Forward(frames.mic, &mic_spec_);
  stft_.Forward(frames.far_end, &far_spec_);
  SplitInto(mic_spec_, &mic_mag_, &mic_phase_);
  SplitInto(far_spec_, &far_mag_, nullptr);
  NormalizeInto(mic_mag_, &mic_norm_);
  NormalizeInto(far_mag_, &far_norm_);
  const auto t2 = Clock::now();

  model_->Run(mic_norm_.grid, far_norm_.grid, &estimate_);
  const auto t3 = Clock::now();

  reconstructor_.Run(estimate_, mic_phase_, mic_norm_.scale, out);
  const auto t4 = Clock::now();

  if (times != nullptr) {
    times->get_buffer_ms = Ms(t0, t1);
    times->data_preparation_ms = Ms(t1, t2);
    times->model_inference_ms = Ms(t2, t3);
    times->data_extraction_ms = Ms(t3, t4);
    times->total_ms = Ms(t0, t4);
  }
}

void StreamProcessor::Reset() { assembler_.Reset(); }

std::string ToString(EngineKind kind) {
  switch (kind) {
    case EngineKind::kUnet:
      return "unet";
    case EngineKind::kPfbLms:
      return "pfblms";
    case EngineKind::kPassthrough:
      return "passthrough";
  }
  return "unknown";
}

EngineKind ParseEngineKind(const std::string& text) {
  if (text == "unet") return EngineKind::kUnet;
  if (text == "pfblms") return EngineKind::kPfbLms;
  if (text == "passthrough") return EngineKind::kPassthrough;
  throw std::invalid_argument("unknown engine '" + text +
                              "' (expected unet, pfblms or passthrough)");
}

void EngineConfig::Validate() const {
  Require(stride == static_cast<int>(kStrideSamples),
          "engine: stride must be 640 samples");
  Require(frame == static_cast<int>(kFrameSamples),
          "engine: frame must be 2560 samples");
  Require(frame % stride == 0, "engine: stride must divide frame");
  if (engine == EngineKind::kUnet) {
    Require(!weights.empty(), "engine: the unet engine needs a weights file");
  }
}

StreamingEngine::StreamingEngine(std::string name,
                                 std::unique_ptr<SpectralModel> model)
    : name_(std::move(name)), processor_(std::move(model)) {}

std::vector<double> StreamingEngine::Process(std::span<const double> far,
                                             std::span<const double> mic,
                                             std::vector<StageTimes>* times) {
  Require(far.size() == mic.size(), "stream: far/mic length mismatch");
  const std::size_t strides = mic.size() / kStrideSamples;
  std::vector<double> out(strides * kStrideSamples);
  if (times != nullptr) times->reserve(times->size() + strides);
  processor_.Reset();
  StageTimes stage;
  for (std::size_t i = 0; i < strides; ++i) {
    const std::size_t at = i * kStrideSamples;
    processor_.ProcessStride(far.subspan(at, kStrideSamples),
                             mic.subspan(at, kStrideSamples),
                             std::span<double>(out).subspan(at, kStrideSamples),
                             times != nullptr ? &stage : nullptr);
    if (times != nullptr) times->push_back(stage);
  }
  return out;
}

PfbLmsEngine::PfbLmsEngine(const PfbLmsConfig& config) : config_(config) {
  PfbLms probe(config_);  // validates the configuration
  final_mu_ = probe.mu();
}

std::vector<double> PfbLmsEngine::Process(std::span<const double> far,
                                          std::span<const double> mic,
                                          std::vector<StageTimes>* times) {
  Require(far.size() == mic.size(), "stream: far/mic length mismatch");
  PfbLms filter(config_);
  const std::size_t length = (mic.size() / kStrideSamples) * kStrideSamples;
  const std::size_t block = filter.block_size();
  std::vector<double> out(length);
  std::vector<double> far_block(block);
  std::vector<double> mic_block(block);
  std::vector<double> err_block(block);
  for (std::size_t start = 0; start < length; start += block) {
    const std::size_t n = std::min(block, length - start);
    const auto t0 = Clock::now();
    std::fill(far_block.begin(), far_block.end(), 0.0);
    std::fill(mic_block.begin(), mic_block.end(), 0.0);
    std::copy_n(far.begin() + start, n, far_block.begin());
    std::copy_n(mic.begin() + start, n, mic_block.begin());
    const auto t1 = Clock::now();
    filter.ProcessBlock(far_block, mic_block, err_block);
    filter.CheckDivergence(err_block, mic_block);
    const auto t2 = Clock::now();
    std::copy_n(err_block.begin(), n, out.begin() + start);
    const auto t3 = Clock::now();
    if (times != nullptr) {
      StageTimes stage;
      stage.get_buffer_ms = Ms(t0, t1);
      stage.model_inference_ms = Ms(t1, t2);
      stage.data_extraction_ms = Ms(t2, t3);
      stage.total_ms = Ms(t0, t3);
      times->push_back(stage);
    }
  }
  final_mu_ = filter.mu();
  return out;
}

std::unique_ptr<Engine> MakePassthroughEngine() {
  return std::make_unique<StreamingEngine>("passthrough",
                                           std::make_unique<IdentityModel>());
}

std::unique_ptr<Engine> MakeUnetEngine(const NetWeights& weights,
                                       Precision precision) {
  return std::make_unique<StreamingEngine>(
      "unet-" + ToString(precision),
      std::make_unique<UNetModel>(weights, precision));
}

std::unique_ptr<Engine> MakeEngine(const EngineConfig& config) {
  config.Validate();
  switch (config.engine) {
    case EngineKind::kPassthrough:
      return MakePassthroughEngine();
    case EngineKind::kPfbLms:
      return std::make_unique<PfbLmsEngine>(config.pfblms);
    case EngineKind::kUnet:
      return MakeUnetEngine(LoadWeights(config.weights), config.precision);
  }
  throw std::invalid_argument("engine: unknown kind");
}

StreamResult StreamProcess(Engine& engine, const AudioBuffer& far,
                           const AudioBuffer& mic) {
  Require(far.sample_rate == kSampleRateHz && mic.sample_rate == kSampleRateHz,
          "stream: inputs must be 16000 Hz (far " +
              std::to_string(far.sample_rate) + " Hz, mic " +
              std::to_string(mic.sample_rate) + " Hz)");
  const std::size_t n = std::min(far.size(), mic.size());
  StreamResult result;
  result.trimmed = far.size() != mic.size();
  std::vector<StageTimes> times;
  result.output = engine.Process(far.view().first(n), mic.view().first(n), &times);
  result.latency = Summarize(times);
  return result;
}

BenchReport Bench(Engine& engine, Precision precision, double duration_s,
                  int repetitions, std::uint64_t seed) {
  Require(duration_s > 0.0, "bench: duration must be positive");
  Require(repetitions >= 1, "bench: repetitions must be positive");
  const auto length = static_cast<std::size_t>(duration_s * kSampleRateHz);
  const std::vector<double> far = SpeechShapedNoise(length, DeriveSeed(seed, 0));
  const std::vector<double> near = SpeechShapedNoise(length, DeriveSeed(seed, 1));
  MixtureSpec spec;
  spec.rir = GenRir(128.0, 30.0, DeriveSeed(seed, 2));
  const SyntheticSample sample = Mix(near, far, spec, DeriveSeed(seed, 3));

  std::vector<StageTimes> times;
  for (int r = 0; r < repetitions; ++r) {
    engine.Process(sample.far_end.view(), sample.mic.view(), &times);
  }
  BenchReport report;
  report.engine = engine.name();
  report.precision = precision;
  report.latency = Summarize(times);
  report.within_budget = report.latency.total.mean < kStrideBudgetMs;
  return report;
}

void WriteBenchReport(std::ostream& out, std::span<const BenchReport> reports) {
  out << "engine,precision,stage,mean_ms,median_ms,p95_ms,samples\n";
  const auto old_precision = out.precision(6);
  for (const BenchReport& r : reports) {
    const std::pair<const char*, const TimingStats*> stages[] = {
        {"get_buffer", &r.latency.get_buffer},
        {"data_preparation", &r.latency.data_preparation},
        {"model_inference", &r.latency.model_inference},
        {"data_extraction", &r.latency.data_extraction},
        {"total", &r.latency.total},
    };
    for (const auto& [stage, stats] : stages) {
      out << r.engine << ',' << ToString(r.precision) << ',' << stage << ','
          << stats->mean << ',' << stats->median << ',' << stats->p95 << ','
          << r.latency.samples << '\n';
    }
  }
  out.precision(old_precision);
}

}  // namespace unetaec
