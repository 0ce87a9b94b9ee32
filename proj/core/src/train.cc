#include "unetaec/train.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "unetaec/common.h"
#include "unetaec/features.h"
#include "unetaec/random.h"
#include "unetaec/stft.h"

namespace unetaec {

void LossConfig::Validate(std::size_t time_frames) const {
  Require(tf_frames >= 1, "loss: tf_frames must be positive");
  Require(static_cast<std::size_t>(tf_frames) <= time_frames,
          "loss: tf_frames " + std::to_string(tf_frames) +
              " exceeds the " + std::to_string(time_frames) + " time frames");
}

namespace {

template <typename T>
void CheckLossShapes(const Tensor<T>& estimate, const Tensor<T>& target,
                     const LossConfig& config) {
  Require(estimate.SameShape(target), "loss: estimate/target shape mismatch");
  Require(estimate.channels() == 1, "loss: expected a single channel");
  config.Validate(estimate.time());
}

template <typename T>
double SumSquaredTail(const Tensor<T>& estimate, const Tensor<T>& target,
                      std::size_t first) {
  double sum = 0.0;
  for (std::size_t f = 0; f < estimate.freq(); ++f) {
    for (std::size_t t = first; t < estimate.time(); ++t) {
      const double d = static_cast<double>(estimate(f, t, 0)) -
                       static_cast<double>(target(f, t, 0));
      sum += d * d;
    }
  }
  return sum;
}

}  // namespace

template <typename T>
double SpectralLoss(const Tensor<T>& estimate, const Tensor<T>& target,
                    const LossConfig& config) {
  CheckLossShapes(estimate, target, config);
  const std::size_t first = estimate.time() - config.tf_frames;
  const double count =
      static_cast<double>(config.tf_frames) * static_cast<double>(estimate.freq());
  return std::sqrt(SumSquaredTail(estimate, target, first) / count);
}

template <typename T>
double SpectralLossGradient(const Tensor<T>& estimate, const Tensor<T>& target,
                            const LossConfig& config, Tensor<T>* grad) {
  CheckLossShapes(estimate, target, config);
  const std::size_t first = estimate.time() - config.tf_frames;
  const double count =
      static_cast<double>(config.tf_frames) * static_cast<double>(estimate.freq());
  const double loss = std::sqrt(SumSquaredTail(estimate, target, first) / count);

  grad->Resize(estimate.freq(), estimate.time(), 1);
  grad->Fill(T{});
  if (loss == 0.0) return loss;
  // dL/dS_hat = (S_hat - S) / (L * M * K) inside the scored frames.
  const double factor = 1.0 / (loss * count);
  for (std::size_t f = 0; f < estimate.freq(); ++f) {
    for (std::size_t t = first; t < estimate.time(); ++t) {
      const double d = static_cast<double>(estimate(f, t, 0)) -
                       static_cast<double>(target(f, t, 0));
      (*grad)(f, t, 0) = static_cast<T>(d * factor);
    }
  }
  return loss;
}

template double SpectralLoss(const Tensor<float>&, const Tensor<float>&,
                             const LossConfig&);
template double SpectralLoss(const Tensor<double>&, const Tensor<double>&,
                             const LossConfig&);
template double SpectralLossGradient(const Tensor<float>&, const Tensor<float>&,
                                     const LossConfig&, Tensor<float>*);
template double SpectralLossGradient(const Tensor<double>&,
                                     const Tensor<double>&, const LossConfig&,
                                     Tensor<double>*);

std::string ToString(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd:
      return "sgd";
    case OptimizerKind::kAdam:
      return "adam";
    case OptimizerKind::kNadam:
      return "nadam";
  }
  return "unknown";
}

OptimizerKind ParseOptimizerKind(const std::string& text) {
  if (text == "sgd") return OptimizerKind::kSgd;
  if (text == "adam") return OptimizerKind::kAdam;
  if (text == "nadam") return OptimizerKind::kNadam;
  throw std::invalid_argument("unknown optimizer '" + text +
                              "' (expected sgd, adam or nadam)");
}

void OptimizerConfig::Validate() const {
  Require(std::isfinite(learning_rate) && learning_rate >= 0.0,
          "optimizer: learning_rate must be finite and non-negative");
  Require(beta1 >= 0.0 && beta1 < 1.0, "optimizer: beta1 must be in [0, 1)");
  Require(beta2 >= 0.0 && beta2 < 1.0, "optimizer: beta2 must be in [0, 1)");
  Require(eps > 0.0, "optimizer: eps must be positive");
  Require(momentum >= 0.0 && momentum < 1.0,
          "optimizer: momentum must be in [0, 1)");
}

template <typename T>
Optimizer<T>::Optimizer(const OptimizerConfig& config, std::size_t param_count)
    : config_(config), m_(param_count, 0.0), v_(param_count, 0.0) {
  config_.Validate();
}

template <typename T>
void Optimizer<T>::Step(const NetParams<T>& grads, NetParams<T>* params) {
  Require(grads.param_count() == m_.size() &&
              params->param_count() == m_.size(),
          "optimizer: parameter count mismatch");
  bool finite = true;
  grads.ForEach([&](const T& g) {
    finite = finite && std::isfinite(static_cast<double>(g));
  });
  Require(finite, "optimizer: gradient contains NaN or Inf; step rejected");

  std::vector<double> flat;
  flat.reserve(m_.size());
  grads.ForEach([&](const T& g) { flat.push_back(static_cast<double>(g)); });

  ++steps_;
  const double lr = config_.learning_rate;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double t = static_cast<double>(steps_);
  const double c1 = 1.0 - std::pow(b1, t);
  const double c1_next = 1.0 - std::pow(b1, t + 1.0);
  const double c2 = 1.0 - std::pow(b2, t);

  std::size_t i = 0;
  params->ForEach([&](T& w) {
    const double g = flat[i];
    double update = 0.0;
    switch (config_.kind) {
      case OptimizerKind::kSgd:
        m_[i] = config_.momentum * m_[i] + g;
        update = lr * m_[i];
        break;
      case OptimizerKind::kAdam: {
        m_[i] = b1 * m_[i] + (1.0 - b1) * g;
        v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
        const double denom = std::sqrt(v_[i] / c2) + config_.eps;
        update = lr * (m_[i] / c1) / denom;
        break;
      }
      case OptimizerKind::kNadam: {
        m_[i] = b1 * m_[i] + (1.0 - b1) * g;
        v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
        const double denom = std::sqrt(v_[i] / c2) + config_.eps;
        const double lookahead = b1 * m_[i] / c1_next + (1.0 - b1) * g / c1;
        update = lr * lookahead / denom;
        break;
      }
    }
    w = static_cast<T>(static_cast<double>(w) - update);
    ++i;
  });
}

template class Optimizer<float>;
template class Optimizer<double>;

TrainingExample MakeExample(std::span<const double> far_frame,
                            std::span<const double> mic_frame,
                            std::span<const double> near_frame) {
  const NormalizedFeature mic = Normalize(Magnitude(Stft(mic_frame)));
  const NormalizedFeature far = Normalize(Magnitude(Stft(far_frame)));
  const RealGrid near = Magnitude(Stft(near_frame));

  TrainingExample example;
  example.input = Tensor<double>(kNumBins, kNumFrames, 2);
  example.target = Tensor<double>(kNumBins, kNumFrames, 1);
  for (std::size_t f = 0; f < kNumBins; ++f) {
    for (std::size_t t = 0; t < kNumFrames; ++t) {
      example.input(f, t, 0) = mic.grid(f, t);
      example.input(f, t, 1) = far.grid(f, t);
      example.target(f, t, 0) = near(f, t) / mic.scale;
    }
  }
  return example;
}

std::vector<TrainingExample> SampleExamples(std::span<const double> far,
                                            std::span<const double> mic,
                                            std::span<const double> near,
                                            std::size_t count,
                                            std::uint64_t seed) {
  Require(far.size() == mic.size() && mic.size() == near.size(),
          "examples: far/mic/near lengths differ");
  Rng rng(seed);
  std::vector<TrainingExample> out;
  out.reserve(count);
  std::vector<double> f(kFrameSamples), m(kFrameSamples), n(kFrameSamples);
  const std::size_t span =
      mic.size() > kFrameSamples ? mic.size() - kFrameSamples + 1 : 1;
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t offset = rng.Below(span);
    for (std::size_t j = 0; j < kFrameSamples; ++j) {
      const std::size_t at = offset + j;
      const bool inside = at < mic.size();
      f[j] = inside ? far[at] : 0.0;
      m[j] = inside ? mic[at] : 0.0;
      n[j] = inside ? near[at] : 0.0;
    }
    out.push_back(MakeExample(f, m, n));
  }
  return out;
}

TrainingExample CropExample(const TrainingExample& example, std::size_t freq,
                            std::size_t time) {
  const Tensor<double>& in = example.input;
  Require(freq >= 1 && freq <= in.freq() && time >= 1 && time <= in.time(),
          "crop: size exceeds the example");
  const std::size_t t0 = in.time() - time;
  auto crop = [&](const Tensor<double>& src) {
    Tensor<double> out(freq, time, src.channels());
    for (std::size_t c = 0; c < src.channels(); ++c) {
      for (std::size_t f = 0; f < freq; ++f) {
        for (std::size_t t = 0; t < time; ++t) out(f, t, c) = src(f, t0 + t, c);
      }
    }
    return out;
  };
  return TrainingExample{crop(example.input), crop(example.target)};
}

namespace {

template <typename T>
Tensor<T> CastTensor(const Tensor<double>& src) {
  Tensor<T> out(src.freq(), src.time(), src.channels());
  for (std::size_t i = 0; i < src.size(); ++i) {
    out.raw()[i] = static_cast<T>(src.raw()[i]);
  }
  return out;
}

template <typename T>
struct CastDataset {
  std::vector<Tensor<T>> inputs;
  std::vector<Tensor<T>> targets;

  explicit CastDataset(std::span<const TrainingExample> dataset) {
    for (const auto& example : dataset) {
      inputs.push_back(CastTensor<T>(example.input));
      targets.push_back(CastTensor<T>(example.target));
    }
  }
};

template <typename T>
double MeanLoss(const CastDataset<T>& data, const NetParams<T>& params,
                const LossConfig& loss) {
  Tape<T> tape(params);
  double sum = 0.0;
  for (std::size_t i = 0; i < data.inputs.size(); ++i) {
    sum += SpectralLoss(tape.Forward(data.inputs[i]), data.targets[i], loss);
  }
  return sum / static_cast<double>(data.inputs.size());
}

}  // namespace

template <typename T>
TrainResult<T> Train(std::span<const TrainingExample> dataset,
                     NetParams<T> initial, const OptimizerConfig& optimizer,
                     const TrainOptions& options) {
  Require(!dataset.empty(), "train: empty dataset");
  Require(options.epochs >= 0, "train: epochs must be non-negative");
  Require(options.batch >= 1, "train: batch must be positive");
  for (const auto& example : dataset) {
    CheckInputShape(initial.topology, example.input.freq(),
                    example.input.time(), example.input.channels());
    Require(example.target.freq() == example.input.freq() &&
                example.target.time() == example.input.time() &&
                example.target.channels() == 1,
            "train: target shape does not match input");
  }
  ValidateParams(initial);

  const CastDataset<T> data(dataset);
  TrainResult<T> result;
  result.params = std::move(initial);
  NetParams<T> grads = NetParams<T>::Zeros(result.params.topology);
  Optimizer<T> opt(optimizer, result.params.param_count());
  Tape<T> tape(result.params);
  Tensor<T> grad_out;

  Rng rng(DeriveSeed(options.seed, 1));
  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t batch = static_cast<std::size_t>(options.batch);

  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    rng.Shuffle(order.begin(), order.end());
    double epoch_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      grads.ForEach([](T& g) { g = T{}; });
      for (std::size_t j = start; j < end; ++j) {
        const std::size_t idx = order[j];
        const Tensor<T>& out = tape.Forward(data.inputs[idx]);
        epoch_sum +=
            SpectralLossGradient(out, data.targets[idx], options.loss, &grad_out);
        tape.Backward(grad_out, &grads);
      }
      const T inv = static_cast<T>(1.0 / static_cast<double>(end - start));
      grads.ForEach([inv](T& g) { g *= inv; });
      opt.Step(grads, &result.params);
    }
    result.epoch_loss.push_back(epoch_sum / static_cast<double>(order.size()));
  }
  result.final_loss = MeanLoss(data, result.params, options.loss);
  return result;
}

template <typename T>
TrainResult<T> Train(std::span<const TrainingExample> dataset,
                     const NetTopology& topology,
                     const OptimizerConfig& optimizer,
                     const TrainOptions& options) {
  const NetWeights init = RandomWeights(topology, DeriveSeed(options.seed, 0));
  return Train<T>(dataset, CastParams<T>(init.params), optimizer, options);
}

template <typename T>
double EvaluateLoss(std::span<const TrainingExample> dataset,
                    const NetParams<T>& params, const LossConfig& loss) {
  Require(!dataset.empty(), "evaluate: empty dataset");
  return MeanLoss(CastDataset<T>(dataset), params, loss);
}

template TrainResult<float> Train(std::span<const TrainingExample>,
                                  NetParams<float>, const OptimizerConfig&,
                                  const TrainOptions&);
template TrainResult<double> Train(std::span<const TrainingExample>,
                                   NetParams<double>, const OptimizerConfig&,
                                   const TrainOptions&);
template TrainResult<float> Train(std::span<const TrainingExample>,
                                  const NetTopology&, const OptimizerConfig&,
                                  const TrainOptions&);
template TrainResult<double> Train(std::span<const TrainingExample>,
                                   const NetTopology&, const OptimizerConfig&,
                                   const TrainOptions&);
template double EvaluateLoss(std::span<const TrainingExample>,
                             const NetParams<float>&, const LossConfig&);
template double EvaluateLoss(std::span<const TrainingExample>,
                             const NetParams<double>&, const LossConfig&);

NetTopology SearchConfig::ToTopology(int residual_depth) const {
  NetTopology topology;
  topology.num_encoders = num_encoders;
  topology.num_decoders = num_encoders - 1;
  topology.base_filters = base_filters;
  topology.residual_config = residual;
  topology.residual_depth = residual_depth;
  topology.Validate();
  return topology;
}

OptimizerConfig SearchConfig::ToOptimizer() const {
  OptimizerConfig config;
  config.kind = optimizer;
  config.learning_rate = learning_rate;
  return config;
}

std::vector<SearchConfig> SearchSpace::Enumerate() const {
  std::vector<SearchConfig> configs;
  for (OptimizerKind opt : optimizers) {
    for (double lr : learning_rates) {
      for (int enc : encoders) {
        for (ResidualConfig res : residuals) {
          for (int f0 : base_filters) {
            configs.push_back(SearchConfig{opt, lr, enc, res, f0});
          }
        }
      }
    }
  }
  return configs;
}

std::size_t SearchSpace::size() const {
  return optimizers.size() * learning_rates.size() * encoders.size() *
         residuals.size() * base_filters.size();
}

std::vector<TrialResult> RandomSearch(
    const SearchSpace& space, std::span<const TrainingExample> train_set,
    std::span<const TrainingExample> validation_set,
    const SearchOptions& options) {
  const std::vector<SearchConfig> grid = space.Enumerate();
  Require(options.budget > 0, "search: budget must be positive");
  Require(static_cast<std::size_t>(options.budget) <= grid.size(),
          "search: budget " + std::to_string(options.budget) +
              " exceeds the grid size " + std::to_string(grid.size()));
  Require(!train_set.empty(), "search: empty training set");
  const auto validation = validation_set.empty() ? train_set : validation_set;

  std::vector<std::size_t> picks(grid.size());
  std::iota(picks.begin(), picks.end(), std::size_t{0});
  Rng rng(options.seed);
  rng.Shuffle(picks.begin(), picks.end());
  picks.resize(static_cast<std::size_t>(options.budget));

  std::vector<TrialResult> results;
  for (std::size_t index : picks) {
    TrialResult trial;
    trial.grid_index = index;
    trial.config = grid[index];
    TrainOptions train;
    train.epochs = options.epochs;
    train.batch = options.batch;
    train.seed = DeriveSeed(options.seed, index);
    train.loss = options.loss;
    try {
      const auto trained =
          Train<float>(train_set, trial.config.ToTopology(options.residual_depth),
                       trial.config.ToOptimizer(), train);
      trial.train_loss = trained.final_loss;
      trial.validation_loss =
          EvaluateLoss(validation, trained.params, options.loss);
    } catch (const std::invalid_argument&) {
      // A trial whose gradients blow up ranks last instead of aborting.
      trial.train_loss = std::numeric_limits<double>::infinity();
      trial.validation_loss = std::numeric_limits<double>::infinity();
    }
    if (!std::isfinite(trial.validation_loss)) {
      trial.validation_loss = std::numeric_limits<double>::infinity();
    }
    results.push_back(trial);
  }
  std::sort(results.begin(), results.end(),
            [](const TrialResult& a, const TrialResult& b) {
              if (a.validation_loss != b.validation_loss) {
                return a.validation_loss < b.validation_loss;
              }
              return a.grid_index < b.grid_index;
            });
  return results;
}

void WriteSearchReport(std::ostream& out,
                       const std::vector<TrialResult>& ranked) {
  out << "rank,grid_index,optimizer,learning_rate,encoders,decoders,residual,"
         "base_filters,train_loss,validation_loss\n";
  const auto old_precision = out.precision(9);
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const TrialResult& r = ranked[i];
    out << (i + 1) << ',' << r.grid_index << ',' << ToString(r.config.optimizer)
        << ',' << r.config.learning_rate << ',' << r.config.num_encoders << ','
        << (r.config.num_encoders - 1) << ',' << ToString(r.config.residual)
        << ',' << r.config.base_filters << ',' << r.train_loss << ','
        << r.validation_loss << '\n';
  }
  out.precision(old_precision);
}

}  // namespace unetaec
