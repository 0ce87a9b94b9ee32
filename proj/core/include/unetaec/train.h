#ifndef UNETAEC_TRAIN_H_
#define UNETAEC_TRAIN_H_

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "unetaec/tensor.h"
#include "unetaec/topology.h"
#include "unetaec/unet.h"
#include "unetaec/weights.h"

namespace unetaec {

// Root-mean-square spectral error restricted to the newest `tf_frames` time
// frames (8 frames of 80 samples = one 640-sample stride).
struct LossConfig {
  int tf_frames = 8;
  void Validate(std::size_t time_frames) const;
};

// Estimate and target are (freq x time x 1).
template <typename T>
double SpectralLoss(const Tensor<T>& estimate, const Tensor<T>& target,
                    const LossConfig& config);

// Same value as SpectralLoss; also writes d(loss)/d(estimate) to `grad`.
// The gradient is zero when the loss is exactly zero.
template <typename T>
double SpectralLossGradient(const Tensor<T>& estimate, const Tensor<T>& target,
                            const LossConfig& config, Tensor<T>* grad);

enum class OptimizerKind { kSgd, kAdam, kNadam };

std::string ToString(OptimizerKind kind);
// Accepts "sgd", "adam" or "nadam".
OptimizerKind ParseOptimizerKind(const std::string& text);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kNadam;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double momentum = 0.0;  // sgd only

  // learning_rate must be >= 0 (0 freezes the weights); betas in [0, 1).
  void Validate() const;
};

// First-order optimizer with per-scalar state laid out in NetParams::ForEach
// order.
//   sgd:   v = momentum * v + g;  w -= lr * v
//   adam:  bias-corrected first and second moments
//   nadam: adam with the Nesterov look-ahead on the first moment,
//          lr * (b1 * m / (1 - b1^(t+1)) + (1 - b1) * g / (1 - b1^t))
//               / (sqrt(v / (1 - b2^t)) + eps)
template <typename T>
class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, std::size_t param_count);

  // Throws std::invalid_argument, leaving `params` untouched, if any
  // gradient is NaN or infinite or the shapes differ.
  void Step(const NetParams<T>& grads, NetParams<T>* params);

  std::int64_t steps() const { return steps_; }
  const OptimizerConfig& config() const { return config_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

 private:
  OptimizerConfig config_;
  std::int64_t steps_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

// One training pair. Input is (freq x time x 2): channel 0 the normalized
// microphone magnitude, channel 1 the normalized far-end magnitude. Target
// is the near-end magnitude divided by the microphone scale.
struct TrainingExample {
  Tensor<double> input;
  Tensor<double> target;
};

// Builds an example from time-aligned 2560-sample frames.
TrainingExample MakeExample(std::span<const double> far_frame,
                            std::span<const double> mic_frame,
                            std::span<const double> near_frame);

// Draws `count` examples from one mixture, each from a 2560-sample frame at
// a uniformly random offset. Signals shorter than a frame are zero padded.
std::vector<TrainingExample> SampleExamples(std::span<const double> far,
                                            std::span<const double> mic,
                                            std::span<const double> near,
                                            std::size_t count,
                                            std::uint64_t seed);

// Keeps frequency rows [0, freq) and the newest `time` frames of every
// channel. Used to make small toy problems out of full-size examples.
TrainingExample CropExample(const TrainingExample& example, std::size_t freq,
                            std::size_t time);

struct TrainOptions {
  int epochs = 1;
  int batch = 1;
  std::uint64_t seed = 0;
  LossConfig loss;
};

template <typename T>
struct TrainResult {
  NetParams<T> params;
  // Mean loss over each epoch's examples, measured before each step.
  std::vector<double> epoch_loss;
  // Mean loss over the dataset after the last step.
  double final_loss = 0.0;
};

// Mini-batch training from He-initialized weights derived from the seed.
// Batches are shuffled per epoch; gradients are averaged over the batch.
// Bit-reproducible for a fixed seed. Throws on an empty dataset.
template <typename T>
TrainResult<T> Train(std::span<const TrainingExample> dataset,
                     const NetTopology& topology,
                     const OptimizerConfig& optimizer,
                     const TrainOptions& options);

// Same, starting from the given parameters.
template <typename T>
TrainResult<T> Train(std::span<const TrainingExample> dataset,
                     NetParams<T> initial, const OptimizerConfig& optimizer,
                     const TrainOptions& options);

// Mean loss of `params` over `dataset`.
template <typename T>
double EvaluateLoss(std::span<const TrainingExample> dataset,
                    const NetParams<T>& params, const LossConfig& loss);

// One point of the hyperparameter grid.
struct SearchConfig {
  OptimizerKind optimizer = OptimizerKind::kNadam;
  double learning_rate = 1e-4;
  int num_encoders = 4;  // decoders = encoders - 1
  ResidualConfig residual = ResidualConfig::kConf1;
  int base_filters = 16;

  NetTopology ToTopology(int residual_depth) const;
  OptimizerConfig ToOptimizer() const;
};

// optimizer {nadam, sgd, adam} x lr {1e-3, 1e-4, 1e-5} x
// encoders-decoders {4-3, 3-2} x residual {conf1, conf2} x F0 {8, 16}.
struct SearchSpace {
  std::vector<OptimizerKind> optimizers{OptimizerKind::kNadam,
                                        OptimizerKind::kSgd,
                                        OptimizerKind::kAdam};
  std::vector<double> learning_rates{1e-3, 1e-4, 1e-5};
  std::vector<int> encoders{4, 3};
  std::vector<ResidualConfig> residuals{ResidualConfig::kConf1,
                                        ResidualConfig::kConf2};
  std::vector<int> base_filters{8, 16};

  std::vector<SearchConfig> Enumerate() const;
  std::size_t size() const;
};

struct SearchOptions {
  int budget = 72;
  int epochs = 2;
  int batch = 1;
  int residual_depth = 2;
  std::uint64_t seed = 0;
  LossConfig loss;
};

struct TrialResult {
  std::size_t grid_index = 0;
  SearchConfig config;
  double train_loss = 0.0;
  double validation_loss = 0.0;
};

// Trains `budget` grid points drawn without replacement and returns them
// ranked by validation loss (ties broken by grid index). Each trial's
// initialization and batch order derive from (seed, grid index) only.
std::vector<TrialResult> RandomSearch(
    const SearchSpace& space, std::span<const TrainingExample> train_set,
    std::span<const TrainingExample> validation_set,
    const SearchOptions& options);

// Comma-separated table with a header row, rank 1 first.
void WriteSearchReport(std::ostream& out,
                       const std::vector<TrialResult>& ranked);

}  // namespace unetaec

#endif  // UNETAEC_TRAIN_H_
