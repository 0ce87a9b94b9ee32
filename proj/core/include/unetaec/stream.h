#ifndef UNETAEC_STREAM_H_
#define UNETAEC_STREAM_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "unetaec/audio_buffer.h"
#include "unetaec/features.h"
#include "unetaec/pfb_lms.h"
#include "unetaec/tensor.h"
#include "unetaec/unet.h"
#include "unetaec/weights.h"

namespace unetaec {

// Maps normalized (mic, far) magnitude grids to a normalized near-end
// estimate of the same shape.
class SpectralModel {
 public:
  virtual ~SpectralModel() = default;
  virtual void Run(const RealGrid& mic, const RealGrid& far,
                   RealGrid* estimate) = 0;
};

// Returns the microphone features unchanged; the pipeline then reproduces
// the microphone signal.
class IdentityModel : public SpectralModel {
 public:
  void Run(const RealGrid& mic, const RealGrid& far,
           RealGrid* estimate) override;
};

class UNetModel : public SpectralModel {
 public:
  UNetModel(const NetWeights& weights, Precision compute);
  void Run(const RealGrid& mic, const RealGrid& far,
           RealGrid* estimate) override;

 private:
  UNetInference net_;
  Tensor<float> input_;
  Tensor<float> output_;
};

// Wall-clock milliseconds spent in each stage of one stride.
//   get_buffer:       pushing the new 640 samples into the frame history
//   data_preparation: STFT of both frames, magnitude/phase, normalization
//   model_inference:  the spectral model
//   data_extraction:  denormalization, iSTFT and copy of the newest 640
struct StageTimes {
  double get_buffer_ms = 0.0;
  double data_preparation_ms = 0.0;
  double model_inference_ms = 0.0;
  double data_extraction_ms = 0.0;
  double total_ms = 0.0;
};

struct TimingStats {
  double mean = 0.0;
  double median = 0.0;
  double p95 = 0.0;  // nearest-rank
};

struct LatencyBreakdown {
  TimingStats get_buffer;
  TimingStats data_preparation;
  TimingStats model_inference;
  TimingStats data_extraction;
  TimingStats total;
  std::size_t samples = 0;
};

LatencyBreakdown Summarize(std::span<const StageTimes> times);

// Causal 40 ms-stride processor: each call consumes one stride of far-end
// and microphone samples and emits one stride of near-end estimate. Buffers
// are allocated up front, so steady-state calls do not allocate.
class StreamProcessor {
 public:
  explicit StreamProcessor(std::unique_ptr<SpectralModel> model);

  void ProcessStride(std::span<const double> far, std::span<const double> mic,
                     std::span<double> out, StageTimes* times = nullptr);
  void Reset();

 private:
  std::unique_ptr<SpectralModel> model_;
  FrameAssembler assembler_;
  StftProcessor stft_;
  Reconstructor reconstructor_;
  ComplexSpectrogram mic_spec_;
  ComplexSpectrogram far_spec_;
  RealGrid mic_mag_;
  RealGrid mic_phase_;
  RealGrid far_mag_;
  NormalizedFeature mic_norm_;
  NormalizedFeature far_norm_;
  RealGrid estimate_;
};

enum class EngineKind { kUnet, kPfbLms, kPassthrough };

std::string ToString(EngineKind kind);
// Accepts "unet", "pfblms" or "passthrough".
EngineKind ParseEngineKind(const std::string& text);

struct EngineConfig {
  EngineKind engine = EngineKind::kUnet;
  std::filesystem::path weights;  // unet only
  Precision precision = Precision::kFp32;
  int stride = static_cast<int>(kStrideSamples);
  int frame = static_cast<int>(kFrameSamples);
  PfbLmsConfig pfblms;

  void Validate() const;
};

class Engine {
 public:
  virtual ~Engine() = default;
  virtual std::string name() const = 0;
  // Processes a whole stream from a cold start. Output has
  // floor(len / 640) * 640 samples. If `times` is given, one entry per
  // processing step is appended.
  virtual std::vector<double> Process(std::span<const double> far,
                                      std::span<const double> mic,
                                      std::vector<StageTimes>* times = nullptr) = 0;
};

// Streams any SpectralModel through StreamProcessor.
class StreamingEngine : public Engine {
 public:
  StreamingEngine(std::string name, std::unique_ptr<SpectralModel> model);
  std::string name() const override { return name_; }
  std::vector<double> Process(std::span<const double> far,
                              std::span<const double> mic,
                              std::vector<StageTimes>* times) override;

 private:
  std::string name_;
  StreamProcessor processor_;
};

// Runs the adaptive filter in its own 1024-sample blocks; timings are per
// block, with the filter update counted as model inference.
class PfbLmsEngine : public Engine {
 public:
  explicit PfbLmsEngine(const PfbLmsConfig& config);
  std::string name() const override { return "pfblms"; }
  std::vector<double> Process(std::span<const double> far,
                              std::span<const double> mic,
                              std::vector<StageTimes>* times) override;
  // Step size after the last Process call.
  double final_mu() const { return final_mu_; }

 private:
  PfbLmsConfig config_;
  double final_mu_ = 0.0;
};

std::unique_ptr<Engine> MakePassthroughEngine();
std::unique_ptr<Engine> MakeUnetEngine(const NetWeights& weights,
                                       Precision precision);
// Loads weights from config.weights for the unet engine.
std::unique_ptr<Engine> MakeEngine(const EngineConfig& config);

struct StreamResult {
  std::vector<double> output;
  LatencyBreakdown latency;
  // Set when the two inputs differed in length and were trimmed.
  bool trimmed = false;
};

// Equal-rate inputs at 16 kHz; the longer one is trimmed.
StreamResult StreamProcess(Engine& engine, const AudioBuffer& far,
                           const AudioBuffer& mic);

inline constexpr double kStrideBudgetMs = 40.0;
// Relative inference-time reduction from fp32 to fp16 reported for the
// reference implementation (45.63 ms to 21.68 ms).
inline constexpr double kReferenceFp16Reduction = 0.525;

struct BenchReport {
  std::string engine;
  Precision precision = Precision::kFp32;
  LatencyBreakdown latency;
  // Mean per-stride total within the 40 ms budget.
  bool within_budget = false;
};

// Streams `duration_s` of synthetic far-end/microphone audio through the
// engine `repetitions` times and summarizes the stage timings.
BenchReport Bench(Engine& engine, Precision precision, double duration_s,
                  int repetitions, std::uint64_t seed);

// Comma-separated table: one row per (report, stage).
void WriteBenchReport(std::ostream& out, std::span<const BenchReport> reports);

}  // namespace unetaec

#endif  // UNETAEC_STREAM_H_
