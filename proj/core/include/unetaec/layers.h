#ifndef UNETAEC_LAYERS_H_
#define UNETAEC_LAYERS_H_

#include <span>
#include <vector>

#include "unetaec/tensor.h"
#include "unetaec/weights.h"

namespace unetaec {

// Unrolls `channels` planes of freq x time into patch rows for a same-padded
// kh x kw convolution: row (c * kh + dy) * kw + dx holds the input shifted by
// (dy - kh/2, dx - kw/2), zero outside the plane.
template <typename T>
void Im2Col(const T* in, std::size_t channels, std::size_t freq,
            std::size_t time, int kernel_h, int kernel_w, T* cols) {
  const std::size_t plane = freq * time;
  const int pad_h = kernel_h / 2;
  const int pad_w = kernel_w / 2;
  T* dst = cols;
  for (std::size_t c = 0; c < channels; ++c) {
    const T* src = in + c * plane;
    for (int dy = 0; dy < kernel_h; ++dy) {
      for (int dx = 0; dx < kernel_w; ++dx) {
        const long shift_f = dy - pad_h;
        const long shift_t = dx - pad_w;
        for (std::size_t f = 0; f < freq; ++f) {
          const long sf = static_cast<long>(f) + shift_f;
          T* row = dst + f * time;
          if (sf < 0 || sf >= static_cast<long>(freq)) {
            std::fill(row, row + time, T{});
            continue;
          }
          const T* src_row = src + static_cast<std::size_t>(sf) * time;
          for (std::size_t t = 0; t < time; ++t) {
            const long st = static_cast<long>(t) + shift_t;
            row[t] = (st < 0 || st >= static_cast<long>(time))
                         ? T{}
                         : src_row[static_cast<std::size_t>(st)];
          }
        }
        dst += plane;
      }
    }
  }
}

// Same-padded, stride-1 convolution with optional ReLU. When `residual` is
// given it is added after the activation. `scratch` holds the patch matrix
// and may be null.
template <typename T>
void Conv2d(const Tensor<T>& in, const ConvLayer<T>& layer, Activation act,
            Tensor<T>* out, const Tensor<T>* residual = nullptr,
            std::vector<T>* scratch = nullptr);
template <typename T>
Tensor<T> Conv2d(const Tensor<T>& in, const ConvLayer<T>& layer,
                 Activation act);

// 2x1 max pooling along frequency. Frequency size must be even.
template <typename T>
void MaxPoolFreq(const Tensor<T>& in, Tensor<T>* out);
template <typename T>
Tensor<T> MaxPoolFreq(const Tensor<T>& in);

// Transposed convolution, kernel 2x1, stride 2x1: output row 2f + j at
// channel o is bias[o] + sum_c kernel[o][c][j] * in(f, t, c).
template <typename T>
void UpsampleFreq(const Tensor<T>& in, const ConvLayer<T>& layer,
                  Tensor<T>* out, std::vector<T>* scratch = nullptr);
template <typename T>
Tensor<T> UpsampleFreq(const Tensor<T>& in, const ConvLayer<T>& layer);

// Channels of `a` followed by channels of `b`.
template <typename T>
void Concat(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>* out);
template <typename T>
void Add(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>* out);

// `layers` holds the block's layers in canonical order: in, stack[0..N),
// then shortcut for Conf2.
template <typename T>
Tensor<T> ResidualBlock(const Tensor<T>& in,
                        std::span<const ConvLayer<T>> layers,
                        ResidualConfig config, int depth);

// Backward passes. Gradients are accumulated into the outputs, which must
// already be shaped (zeros on first use).
template <typename T>
void Conv2dBackward(const Tensor<T>& in, const Tensor<T>& out,
                    const Tensor<T>& grad_out, const ConvLayer<T>& layer,
                    Activation act, Tensor<T>* grad_in,
                    ConvLayer<T>* grad_layer, std::vector<T>* scratch);
template <typename T>
void MaxPoolFreqBackward(const Tensor<T>& in, const Tensor<T>& grad_out,
                         Tensor<T>* grad_in);
template <typename T>
void UpsampleFreqBackward(const Tensor<T>& in, const Tensor<T>& grad_out,
                          const ConvLayer<T>& layer, Tensor<T>* grad_in,
                          ConvLayer<T>* grad_layer);

}  // namespace unetaec

#endif  // UNETAEC_LAYERS_H_
