#include "unetaec/unet.h"

#include <algorithm>
#include <limits>
#include <string>

#include "unetaec/fp16.h"
#include "unetaec/gemm.h"

namespace unetaec {
namespace {

constexpr std::size_t kNoNode = std::numeric_limits<std::size_t>::max();

// Wires the network once for every backend. A backend provides:
//   Node Conv(Node in, size_t layer, Activation act, Node residual)
//   Node Pool(Node in)
//   Node Upsample(Node in, size_t layer)
//   Node Concat(Node a, Node b)
// where `residual` (or kNoNode) is added after the activation.
template <class Backend>
std::size_t RunGraph(Backend& backend, const NetTopology& topology,
                     std::size_t input, OutputMode mode) {
  const int depth = topology.residual_depth;
  const bool conf2 = topology.residual_config == ResidualConfig::kConf2;
  std::size_t layer = 0;
  auto block = [&](std::size_t in) {
    const std::size_t first = layer;
    layer += 1 + static_cast<std::size_t>(depth) + (conf2 ? 1 : 0);
    const std::size_t a = backend.Conv(in, first, Activation::kRelu, kNoNode);
    const std::size_t shortcut =
        conf2 ? backend.Conv(a, first + 1 + static_cast<std::size_t>(depth),
                             Activation::kLinear, kNoNode)
              : a;
    std::size_t h = a;
    for (int j = 0; j < depth; ++j) {
      h = backend.Conv(h, first + 1 + static_cast<std::size_t>(j),
                       Activation::kRelu, j + 1 == depth ? shortcut : kNoNode);
    }
    return h;
  };

  std::size_t skips[8];
  std::size_t x = input;
  for (int i = 0; i < topology.num_encoders; ++i) {
    if (i > 0) x = backend.Pool(x);
    x = block(x);
    skips[i] = x;
  }
  for (int i = topology.num_encoders - 2; i >= 0; --i) {
    const std::size_t up = backend.Upsample(x, layer++);
    x = block(backend.Concat(up, skips[i]));
  }
  // Linear 1x1 output. Inference clamps it at zero since magnitudes are
  // non-negative; training leaves it unclamped so that an output driven
  // below zero still receives a gradient.
  return backend.Conv(x, layer++,
                      mode == OutputMode::kClamped ? Activation::kRelu
                                                   : Activation::kLinear,
                      kNoNode);
}

// Node storage reused across passes: shapes repeat, so after the first pass
// no tensor reallocates.
template <typename Value>
class NodePool {
 public:
  void Reset() { next_ = 0; }
  std::size_t New() {
    if (next_ == nodes_.size()) nodes_.emplace_back();
    return next_++;
  }
  Value& operator[](std::size_t i) { return nodes_[i]; }
  std::size_t size() const { return next_; }
  std::vector<Value>& all() { return nodes_; }

 private:
  std::vector<Value> nodes_;
  std::size_t next_ = 0;
};

template <typename T>
class DirectBackend {
 public:
  explicit DirectBackend(const NetParams<T>& params) : params_(params) {}

  std::size_t Input(const Tensor<T>& input) {
    pool_.Reset();
    const std::size_t id = pool_.New();
    pool_[id] = input;
    return id;
  }
  std::size_t Conv(std::size_t in, std::size_t layer, Activation act,
                   std::size_t residual) {
    const std::size_t out = pool_.New();
    Conv2d(pool_[in], params_.layers[layer], act, &pool_[out],
           residual == kNoNode ? nullptr : &pool_[residual], &scratch_);
    return out;
  }
  std::size_t Pool(std::size_t in) {
    const std::size_t out = pool_.New();
    MaxPoolFreq(pool_[in], &pool_[out]);
    return out;
  }
  std::size_t Upsample(std::size_t in, std::size_t layer) {
    const std::size_t out = pool_.New();
    UpsampleFreq(pool_[in], params_.layers[layer], &pool_[out], &scratch_);
    return out;
  }
  std::size_t Concat(std::size_t a, std::size_t b) {
    const std::size_t out = pool_.New();
    unetaec::Concat(pool_[a], pool_[b], &pool_[out]);
    return out;
  }
  Tensor<T>& node(std::size_t id) { return pool_[id]; }

 private:
  const NetParams<T>& params_;
  NodePool<Tensor<T>> pool_;
  std::vector<T> scratch_;
};

struct HalfLayer {
  LayerSpec spec;
  std::vector<std::uint16_t> kernel;
  std::vector<float> bias;
};

// Half-precision activations and weights; biases and fp32 partial sums are
// kept wide (see GemmHalf).
class HalfBackend {
 public:
  explicit HalfBackend(const NetParams<float>& params) {
    for (const auto& layer : params.layers) {
      HalfLayer half;
      half.spec = layer.spec;
      half.kernel.resize(layer.kernel.size());
      for (std::size_t i = 0; i < layer.kernel.size(); ++i) {
        half.kernel[i] = FloatToHalf(layer.kernel[i]);
      }
      half.bias.assign(layer.bias.begin(), layer.bias.end());
      layers_.push_back(std::move(half));
    }
  }

  std::size_t Input(const Tensor<float>& input) {
    pool_.Reset();
    const std::size_t id = pool_.New();
    auto& node = pool_[id];
    node.Resize(input.freq(), input.time(), input.channels());
    FloatToHalfBuffer(input.raw(), input.size(), node.raw());
    return id;
  }

  std::size_t Conv(std::size_t in, std::size_t layer, Activation act,
                   std::size_t residual) {
    const HalfLayer& l = layers_[layer];
    const std::size_t out = pool_.New();
    const auto& x = pool_[in];
    auto& y = pool_[out];
    y.Resize(x.freq(), x.time(), static_cast<std::size_t>(l.spec.out_channels));
    const std::size_t plane = x.plane_size();
    const std::size_t depth = static_cast<std::size_t>(l.spec.in_channels) *
                              l.spec.kernel_h * l.spec.kernel_w;
    const std::uint16_t* cols = x.raw();
    if (l.spec.kernel_h != 1 || l.spec.kernel_w != 1) {
      scratch_.resize(depth * plane);
      Im2Col(x.raw(), x.channels(), x.freq(), x.time(), l.spec.kernel_h,
             l.spec.kernel_w, scratch_.data());
      cols = scratch_.data();
    }
    GemmHalf(static_cast<std::size_t>(l.spec.out_channels), plane, depth,
             l.kernel.data(), cols, l.bias.data(), act,
             residual == kNoNode ? nullptr : pool_[residual].raw(), y.raw());
    return out;
  }

  std::size_t Pool(std::size_t in) {
    const std::size_t out = pool_.New();
    const auto& x = pool_[in];
    auto& y = pool_[out];
    y.Resize(x.freq() / 2, x.time(), x.channels());
    MaxPoolRowsHalf(x.raw(), x.channels() * (x.freq() / 2), x.time(), y.raw());
    return out;
  }

  std::size_t Upsample(std::size_t in, std::size_t layer) {
    const HalfLayer& l = layers_[layer];
    const std::size_t out = pool_.New();
    const auto& x = pool_[in];
    auto& y = pool_[out];
    const std::size_t in_ch = x.channels();
    const std::size_t out_ch = static_cast<std::size_t>(l.spec.out_channels);
    const std::size_t plane = x.plane_size();
    const std::size_t time = x.time();
    y.Resize(2 * x.freq(), time, out_ch);
    taps_.resize(out_ch * in_ch);
    scratch_.resize(out_ch * plane);
    for (std::size_t j = 0; j < 2; ++j) {
      for (std::size_t o = 0; o < out_ch; ++o) {
        for (std::size_t c = 0; c < in_ch; ++c) {
          taps_[o * in_ch + c] = l.kernel[(o * in_ch + c) * 2 + j];
        }
      }
      GemmHalf(out_ch, plane, in_ch, taps_.data(), x.raw(), l.bias.data(),
               Activation::kLinear, nullptr, scratch_.data());
      for (std::size_t o = 0; o < out_ch; ++o) {
        std::uint16_t* dst = y.plane(o).data();
        const std::uint16_t* src = scratch_.data() + o * plane;
        for (std::size_t f = 0; f < x.freq(); ++f) {
          std::copy_n(src + f * time, time, dst + (2 * f + j) * time);
        }
      }
    }
    return out;
  }

  std::size_t Concat(std::size_t a, std::size_t b) {
    const std::size_t out = pool_.New();
    const auto& x = pool_[a];
    const auto& z = pool_[b];
    auto& y = pool_[out];
    y.Resize(x.freq(), x.time(), x.channels() + z.channels());
    std::copy(x.data().begin(), x.data().end(), y.data().begin());
    std::copy(z.data().begin(), z.data().end(),
              y.data().begin() + static_cast<long>(x.size()));
    return out;
  }

  void Output(std::size_t id, Tensor<float>* out) {
    const auto& y = pool_[id];
    out->Resize(y.freq(), y.time(), y.channels());
    HalfToFloatBuffer(y.raw(), y.size(), out->raw());
  }

 private:
  std::vector<HalfLayer> layers_;
  NodePool<Tensor<std::uint16_t>> pool_;
  std::vector<std::uint16_t> scratch_;
  std::vector<std::uint16_t> taps_;
};

}  // namespace

void CheckInputShape(const NetTopology& topology, std::size_t freq,
                     std::size_t time, std::size_t channels) {
  topology.Validate();
  Require(channels == static_cast<std::size_t>(topology.in_channels),
          "forward: input must have " + std::to_string(topology.in_channels) +
              " channels");
  Require(freq > 0 && time > 0, "forward: empty input");
  Require(freq % topology.FreqDivisor() == 0,
          "forward: frequency size " + std::to_string(freq) +
              " is not divisible by " +
              std::to_string(topology.FreqDivisor()));
}

template <typename T>
Tensor<T> Forward(const NetParams<T>& params, const Tensor<T>& input,
                  OutputMode mode) {
  CheckInputShape(params.topology, input.freq(), input.time(),
                  input.channels());
  ValidateParams(params);
  DirectBackend<T> backend(params);
  const std::size_t in = backend.Input(input);
  return std::move(backend.node(RunGraph(backend, params.topology, in, mode)));
}

template Tensor<float> Forward(const NetParams<float>&, const Tensor<float>&,
                               OutputMode);
template Tensor<double> Forward(const NetParams<double>&,
                                const Tensor<double>&, OutputMode);

namespace {

class Runner {
 public:
  virtual ~Runner() = default;
  virtual void Run(const Tensor<float>& input, Tensor<float>* output) = 0;
};

class FloatImpl final : public Runner {
 public:
  explicit FloatImpl(NetParams<float> params)
      : params_(std::move(params)), backend_(params_) {}
  void Run(const Tensor<float>& input, Tensor<float>* output) override {
    const std::size_t in = backend_.Input(input);
    const std::size_t out = RunGraph(backend_, params_.topology, in, OutputMode::kClamped);
    *output = backend_.node(out);
  }

 private:
  NetParams<float> params_;
  DirectBackend<float> backend_;
};

class HalfImpl final : public Runner {
 public:
  explicit HalfImpl(const NetParams<float>& params)
      : topology_(params.topology), backend_(params) {}
  void Run(const Tensor<float>& input, Tensor<float>* output) override {
    const std::size_t in = backend_.Input(input);
    backend_.Output(RunGraph(backend_, topology_, in, OutputMode::kClamped), output);
  }

 private:
  NetTopology topology_;
  HalfBackend backend_;
};

}  // namespace

class UNetInference::Impl {
 public:
  std::unique_ptr<Runner> runner;
};

UNetInference::UNetInference(const NetWeights& weights, Precision compute)
    : topology_(weights.topology()), compute_(compute) {
  ValidateParams(weights.params);
  if (compute == Precision::kFp16) {
    const NetWeights half = weights.precision == Precision::kFp16
                                ? weights
                                : QuantizeFp16(weights);
    impl_ = std::make_unique<Impl>();
    impl_->runner = std::make_unique<HalfImpl>(half.params);
  } else {
    impl_ = std::make_unique<Impl>();
    impl_->runner = std::make_unique<FloatImpl>(weights.params);
  }
}

UNetInference::~UNetInference() = default;
UNetInference::UNetInference(UNetInference&&) noexcept = default;
UNetInference& UNetInference::operator=(UNetInference&&) noexcept = default;

void UNetInference::Run(const Tensor<float>& input, Tensor<float>* output) {
  CheckInputShape(topology_, input.freq(), input.time(), input.channels());
  impl_->runner->Run(input, output);
}

// ---------------------------------------------------------------------------
// Tape

template <typename T>
struct Tape<T>::Op {
  enum class Kind { kConv, kPool, kUpsample, kConcat, kAdd } kind;
  std::size_t in = 0;
  std::size_t in2 = 0;
  std::size_t out = 0;
  std::size_t layer = 0;
  Activation act = Activation::kLinear;
};

template <typename T>
class Tape<T>::Backend {
 public:
  explicit Backend(Tape& tape) : tape_(tape) {}

  std::size_t New() {
    tape_.nodes_.emplace_back();
    return tape_.nodes_.size() - 1;
  }
  std::size_t Conv(std::size_t in, std::size_t layer, Activation act,
                   std::size_t residual) {
    const std::size_t out = New();
    Conv2d(tape_.nodes_[in], tape_.params_.layers[layer], act,
           &tape_.nodes_[out], static_cast<const Tensor<T>*>(nullptr),
           &tape_.scratch_);
    tape_.ops_.push_back({Op::Kind::kConv, in, 0, out, layer, act});
    if (residual == kNoNode) return out;
    const std::size_t sum = New();
    unetaec::Add(tape_.nodes_[out], tape_.nodes_[residual],
                 &tape_.nodes_[sum]);
    tape_.ops_.push_back({Op::Kind::kAdd, out, residual, sum, 0, act});
    return sum;
  }
  std::size_t Pool(std::size_t in) {
    const std::size_t out = New();
    MaxPoolFreq(tape_.nodes_[in], &tape_.nodes_[out]);
    tape_.ops_.push_back({Op::Kind::kPool, in, 0, out, 0, Activation::kLinear});
    return out;
  }
  std::size_t Upsample(std::size_t in, std::size_t layer) {
    const std::size_t out = New();
    UpsampleFreq(tape_.nodes_[in], tape_.params_.layers[layer],
                 &tape_.nodes_[out], &tape_.scratch_);
    tape_.ops_.push_back(
        {Op::Kind::kUpsample, in, 0, out, layer, Activation::kLinear});
    return out;
  }
  std::size_t Concat(std::size_t a, std::size_t b) {
    const std::size_t out = New();
    unetaec::Concat(tape_.nodes_[a], tape_.nodes_[b], &tape_.nodes_[out]);
    tape_.ops_.push_back({Op::Kind::kConcat, a, b, out, 0, Activation::kLinear});
    return out;
  }

 private:
  Tape& tape_;
};

template <typename T>
Tape<T>::Tape(const NetParams<T>& params) : params_(params) {
  ValidateParams(params_);
}

template <typename T>
Tape<T>::~Tape() = default;

template <typename T>
const Tensor<T>& Tape<T>::Forward(const Tensor<T>& input) {
  CheckInputShape(params_.topology, input.freq(), input.time(),
                  input.channels());
  nodes_.clear();
  ops_.clear();
  nodes_.push_back(input);
  Backend backend(*this);
  output_node_ = RunGraph(backend, params_.topology, 0, OutputMode::kLinear);
  return nodes_[output_node_];
}

template <typename T>
const Tensor<T>& Tape<T>::output() const {
  return nodes_[output_node_];
}

template <typename T>
void Tape<T>::Backward(const Tensor<T>& grad_output, NetParams<T>* grads) {
  Require(!ops_.empty(), "backward: call Forward first");
  Require(grad_output.SameShape(nodes_[output_node_]),
          "backward: gradient shape does not match the network output");
  Require(grads->layers.size() == params_.layers.size(),
          "backward: gradient buffers do not match the network");
  grads_.resize(nodes_.size());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    grads_[i].Resize(nodes_[i].freq(), nodes_[i].time(), nodes_[i].channels());
    grads_[i].Fill(T{});
  }
  grads_[output_node_] = grad_output;
  for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
    const Op& op = *it;
    Tensor<T>& g_out = grads_[op.out];
    switch (op.kind) {
      case Op::Kind::kConv:
        Conv2dBackward(nodes_[op.in], nodes_[op.out], g_out,
                       params_.layers[op.layer], op.act, &grads_[op.in],
                       &grads->layers[op.layer], &scratch_);
        break;
      case Op::Kind::kPool:
        MaxPoolFreqBackward(nodes_[op.in], g_out, &grads_[op.in]);
        break;
      case Op::Kind::kUpsample:
        UpsampleFreqBackward(nodes_[op.in], g_out, params_.layers[op.layer],
                             &grads_[op.in], &grads->layers[op.layer]);
        break;
      case Op::Kind::kConcat: {
        auto src = g_out.data();
        auto a = grads_[op.in].data();
        auto b = grads_[op.in2].data();
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += src[i];
        for (std::size_t i = 0; i < b.size(); ++i) b[i] += src[a.size() + i];
        break;
      }
      case Op::Kind::kAdd: {
        auto src = g_out.data();
        auto a = grads_[op.in].data();
        auto b = grads_[op.in2].data();
        for (std::size_t i = 0; i < src.size(); ++i) {
          a[i] += src[i];
          b[i] += src[i];
        }
        break;
      }
    }
  }
}

template class Tape<float>;
template class Tape<double>;

}  // namespace unetaec
