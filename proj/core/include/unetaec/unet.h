#ifndef UNETAEC_UNET_H_
#define UNETAEC_UNET_H_

#include <cstdint>
#include <memory>
#include <vector>

#include "unetaec/layers.h"
#include "unetaec/tensor.h"
#include "unetaec/weights.h"

namespace unetaec {

// Residual U-Net over a (freq x time x in_channels) feature map. The encoder
// runs one residual block per level with 2x1 frequency pooling between
// levels; each decoder level upsamples, concatenates [upsampled, skip] and
// runs a residual block; a 1x1 conv produces one channel, which inference
// clamps at zero.
// Time resolution is never reduced. For the streaming engine the input is
// 160x32 with channel 0 the microphone and channel 1 the far-end magnitude.

// Throws std::invalid_argument unless `input` suits `topology`.
void CheckInputShape(const NetTopology& topology, std::size_t freq,
                     std::size_t time, std::size_t channels);

// kClamped (inference) clamps the linear 1x1 output at zero; kLinear returns
// it unclamped, which is the quantity the training loss sees.
enum class OutputMode { kClamped, kLinear };

template <typename T>
Tensor<T> Forward(const NetParams<T>& params, const Tensor<T>& input,
                  OutputMode mode = OutputMode::kClamped);

// Reusable inference context. Buffers are sized on the first call and
// reused afterwards, so steady-state calls do not grow memory. One instance
// per thread; the weights it was built from may be shared.
class UNetInference {
 public:
  // `compute` selects fp32 or half-precision arithmetic. For fp16 the
  // weights are rounded to half precision if they are not already.
  UNetInference(const NetWeights& weights, Precision compute);
  ~UNetInference();
  UNetInference(UNetInference&&) noexcept;
  UNetInference& operator=(UNetInference&&) noexcept;

  void Run(const Tensor<float>& input, Tensor<float>* output);
  Precision compute_precision() const { return compute_; }
  const NetTopology& topology() const { return topology_; }

 private:
  class Impl;
  NetTopology topology_;
  Precision compute_;
  std::unique_ptr<Impl> impl_;
};

// Records a forward pass and back-propagates a gradient on the network
// output to every weight (reverse-mode differentiation over the layer
// primitives). The recorded output is the unclamped OutputMode::kLinear one.
template <typename T>
class Tape {
 public:
  explicit Tape(const NetParams<T>& params);
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  const Tensor<T>& Forward(const Tensor<T>& input);
  // Accumulates d(loss)/d(weights) into `grads` (shaped like the params)
  // given d(loss)/d(output) for the last Forward.
  void Backward(const Tensor<T>& grad_output, NetParams<T>* grads);

  const Tensor<T>& output() const;

 private:
  struct Op;
  class Backend;

  const NetParams<T>& params_;
  std::vector<Tensor<T>> nodes_;
  std::vector<Tensor<T>> grads_;
  std::vector<Op> ops_;
  std::vector<T> scratch_;
  std::size_t output_node_ = 0;
};

}  // namespace unetaec

#endif  // UNETAEC_UNET_H_
