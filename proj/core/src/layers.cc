#include "unetaec/layers.h"

#include <algorithm>
#include <string>

#include "unetaec/gemm.h"

namespace unetaec {
namespace {

template <typename T>
void CheckConv(const Tensor<T>& in, const ConvLayer<T>& layer) {
  const LayerSpec& spec = layer.spec;
  Require(spec.kind == LayerKind::kConv, "conv2d: layer is not a convolution");
  Require(in.channels() == static_cast<std::size_t>(spec.in_channels),
          "conv2d: input has " + std::to_string(in.channels()) +
              " channels, kernel expects " + std::to_string(spec.in_channels));
  Require(layer.kernel.size() == spec.kernel_elements() &&
              layer.bias.size() == static_cast<std::size_t>(spec.out_channels),
          "conv2d: kernel or bias size does not match the layer spec");
  Require(in.freq() > 0 && in.time() > 0, "conv2d: empty input");
}

template <typename T>
void CheckUpsample(const Tensor<T>& in, const ConvLayer<T>& layer) {
  const LayerSpec& spec = layer.spec;
  Require(spec.kind == LayerKind::kUpsample && spec.kernel_h == 2 &&
              spec.kernel_w == 1,
          "upsample_freq: layer is not a 2x1 transposed convolution");
  Require(in.channels() == static_cast<std::size_t>(spec.in_channels),
          "upsample_freq: channel mismatch");
  Require(layer.kernel.size() == spec.kernel_elements() &&
              layer.bias.size() == static_cast<std::size_t>(spec.out_channels),
          "upsample_freq: kernel or bias size does not match the layer spec");
}

}  // namespace

template <typename T>
void Conv2d(const Tensor<T>& in, const ConvLayer<T>& layer, Activation act,
            Tensor<T>* out, const Tensor<T>* residual,
            std::vector<T>* scratch) {
  CheckConv(in, layer);
  const LayerSpec& spec = layer.spec;
  const std::size_t plane = in.plane_size();
  const std::size_t depth =
      static_cast<std::size_t>(spec.in_channels) * spec.kernel_h * spec.kernel_w;
  out->Resize(in.freq(), in.time(), static_cast<std::size_t>(spec.out_channels));
  if (residual) {
    Require(residual->SameShape(*out), "conv2d: residual shape mismatch");
  }
  const T* cols = in.raw();
  std::vector<T> local;
  if (spec.kernel_h != 1 || spec.kernel_w != 1) {
    std::vector<T>& buffer = scratch ? *scratch : local;
    buffer.resize(depth * plane);
    Im2Col(in.raw(), in.channels(), in.freq(), in.time(), spec.kernel_h,
           spec.kernel_w, buffer.data());
    cols = buffer.data();
  }
  Gemm<T>(static_cast<std::size_t>(spec.out_channels), plane, depth,
          layer.kernel.data(), cols, layer.bias.data(), act,
          residual ? residual->raw() : nullptr, out->raw());
}

template <typename T>
Tensor<T> Conv2d(const Tensor<T>& in, const ConvLayer<T>& layer,
                 Activation act) {
  Tensor<T> out;
  Conv2d(in, layer, act, &out);
  return out;
}

template <typename T>
void MaxPoolFreq(const Tensor<T>& in, Tensor<T>* out) {
  Require(in.freq() % 2 == 0, "maxpool_freq: frequency size must be even");
  const std::size_t half = in.freq() / 2;
  const std::size_t time = in.time();
  out->Resize(half, time, in.channels());
  for (std::size_t c = 0; c < in.channels(); ++c) {
    const T* src = in.plane(c).data();
    T* dst = out->plane(c).data();
    for (std::size_t f = 0; f < half; ++f) {
      const T* top = src + 2 * f * time;
      const T* bottom = top + time;
      for (std::size_t t = 0; t < time; ++t) {
        dst[f * time + t] = top[t] >= bottom[t] ? top[t] : bottom[t];
      }
    }
  }
}

template <typename T>
Tensor<T> MaxPoolFreq(const Tensor<T>& in) {
  Tensor<T> out;
  MaxPoolFreq(in, &out);
  return out;
}

template <typename T>
void UpsampleFreq(const Tensor<T>& in, const ConvLayer<T>& layer,
                  Tensor<T>* out, std::vector<T>* scratch) {
  CheckUpsample(in, layer);
  const std::size_t in_ch = in.channels();
  const std::size_t out_ch = static_cast<std::size_t>(layer.spec.out_channels);
  const std::size_t plane = in.plane_size();
  const std::size_t time = in.time();
  out->Resize(2 * in.freq(), time, out_ch);
  std::vector<T> local;
  std::vector<T>& buffer = scratch ? *scratch : local;
  buffer.resize(out_ch * in_ch + out_ch * plane);
  T* taps = buffer.data();
  T* product = buffer.data() + out_ch * in_ch;
  for (std::size_t j = 0; j < 2; ++j) {
    for (std::size_t o = 0; o < out_ch; ++o) {
      for (std::size_t c = 0; c < in_ch; ++c) {
        taps[o * in_ch + c] = layer.kernel[(o * in_ch + c) * 2 + j];
      }
    }
    Gemm<T>(out_ch, plane, in_ch, taps, in.raw(), layer.bias.data(),
            Activation::kLinear, nullptr, product);
    for (std::size_t o = 0; o < out_ch; ++o) {
      T* dst = out->plane(o).data();
      const T* src = product + o * plane;
      for (std::size_t f = 0; f < in.freq(); ++f) {
        std::copy_n(src + f * time, time, dst + (2 * f + j) * time);
      }
    }
  }
}

template <typename T>
Tensor<T> UpsampleFreq(const Tensor<T>& in, const ConvLayer<T>& layer) {
  Tensor<T> out;
  UpsampleFreq(in, layer, &out);
  return out;
}

template <typename T>
void Concat(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>* out) {
  Require(a.freq() == b.freq() && a.time() == b.time(),
          "concat: spatial shape mismatch");
  out->Resize(a.freq(), a.time(), a.channels() + b.channels());
  std::copy(a.data().begin(), a.data().end(), out->data().begin());
  std::copy(b.data().begin(), b.data().end(),
            out->data().begin() + static_cast<long>(a.size()));
}

template <typename T>
void Add(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>* out) {
  Require(a.SameShape(b), "add: shape mismatch");
  out->Resize(a.freq(), a.time(), a.channels());
  auto x = a.data();
  auto y = b.data();
  auto z = out->data();
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = x[i] + y[i];
}

template <typename T>
Tensor<T> ResidualBlock(const Tensor<T>& in,
                        std::span<const ConvLayer<T>> layers,
                        ResidualConfig config, int depth) {
  const std::size_t expected =
      1 + static_cast<std::size_t>(depth) +
      (config == ResidualConfig::kConf2 ? 1 : 0);
  Require(layers.size() == expected,
          "residual_block: layer count does not match config and depth");
  Tensor<T> a = Conv2d(in, layers[0], Activation::kRelu);
  Tensor<T> shortcut = config == ResidualConfig::kConf2
                           ? Conv2d(a, layers[expected - 1], Activation::kLinear)
                           : a;
  Tensor<T> h = a;
  Tensor<T> next;
  for (int j = 0; j < depth; ++j) {
    const bool last = j + 1 == depth;
    Conv2d(h, layers[1 + static_cast<std::size_t>(j)], Activation::kRelu,
           &next, last ? &shortcut : nullptr);
    std::swap(h, next);
  }
  return h;
}

template <typename T>
void Conv2dBackward(const Tensor<T>& in, const Tensor<T>& out,
                    const Tensor<T>& grad_out, const ConvLayer<T>& layer,
                    Activation act, Tensor<T>* grad_in,
                    ConvLayer<T>* grad_layer, std::vector<T>* scratch) {
  CheckConv(in, layer);
  const LayerSpec& spec = layer.spec;
  const std::size_t plane = in.plane_size();
  const std::size_t out_ch = static_cast<std::size_t>(spec.out_channels);
  const std::size_t depth =
      static_cast<std::size_t>(spec.in_channels) * spec.kernel_h * spec.kernel_w;
  Require(grad_out.SameShape(out), "conv2d backward: gradient shape mismatch");

  // Gradient at the pre-activation.
  std::vector<T> grad_z(grad_out.data().begin(), grad_out.data().end());
  if (act == Activation::kRelu) {
    auto o = out.data();
    for (std::size_t i = 0; i < grad_z.size(); ++i) {
      if (!(o[i] > T{})) grad_z[i] = T{};
    }
  }
  for (std::size_t o = 0; o < out_ch; ++o) {
    T sum{};
    for (std::size_t i = 0; i < plane; ++i) sum += grad_z[o * plane + i];
    grad_layer->bias[o] += sum;
  }

  const bool pointwise = spec.kernel_h == 1 && spec.kernel_w == 1;
  std::vector<T> local;
  std::vector<T>& cols = scratch ? *scratch : local;
  cols.resize(depth * plane);
  if (pointwise) {
    std::copy(in.data().begin(), in.data().end(), cols.begin());
  } else {
    Im2Col(in.raw(), in.channels(), in.freq(), in.time(), spec.kernel_h,
           spec.kernel_w, cols.data());
  }
  GemmAccumulateABt<T>(out_ch, plane, depth, grad_z.data(), cols.data(),
                       grad_layer->kernel.data());

  // Patch-space gradient, then scatter back onto the input (col2im).
  GemmAtB<T>(out_ch, plane, depth, layer.kernel.data(), grad_z.data(),
             cols.data());
  const std::size_t freq = in.freq();
  const std::size_t time = in.time();
  const int pad_h = spec.kernel_h / 2;
  const int pad_w = spec.kernel_w / 2;
  const T* row = cols.data();
  for (std::size_t c = 0; c < in.channels(); ++c) {
    T* dst = grad_in->plane(c).data();
    for (int dy = 0; dy < spec.kernel_h; ++dy) {
      for (int dx = 0; dx < spec.kernel_w; ++dx) {
        for (std::size_t f = 0; f < freq; ++f) {
          const long sf = static_cast<long>(f) + dy - pad_h;
          if (sf < 0 || sf >= static_cast<long>(freq)) continue;
          for (std::size_t t = 0; t < time; ++t) {
            const long st = static_cast<long>(t) + dx - pad_w;
            if (st < 0 || st >= static_cast<long>(time)) continue;
            dst[static_cast<std::size_t>(sf) * time +
                static_cast<std::size_t>(st)] += row[f * time + t];
          }
        }
        row += plane;
      }
    }
  }
}

template <typename T>
void MaxPoolFreqBackward(const Tensor<T>& in, const Tensor<T>& grad_out,
                         Tensor<T>* grad_in) {
  const std::size_t half = in.freq() / 2;
  const std::size_t time = in.time();
  for (std::size_t c = 0; c < in.channels(); ++c) {
    const T* src = in.plane(c).data();
    const T* g = grad_out.plane(c).data();
    T* dst = grad_in->plane(c).data();
    for (std::size_t f = 0; f < half; ++f) {
      const T* top = src + 2 * f * time;
      const T* bottom = top + time;
      for (std::size_t t = 0; t < time; ++t) {
        const std::size_t winner = top[t] >= bottom[t] ? 2 * f : 2 * f + 1;
        dst[winner * time + t] += g[f * time + t];
      }
    }
  }
}

template <typename T>
void UpsampleFreqBackward(const Tensor<T>& in, const Tensor<T>& grad_out,
                          const ConvLayer<T>& layer, Tensor<T>* grad_in,
                          ConvLayer<T>* grad_layer) {
  CheckUpsample(in, layer);
  const std::size_t in_ch = in.channels();
  const std::size_t out_ch = static_cast<std::size_t>(layer.spec.out_channels);
  const std::size_t freq = in.freq();
  const std::size_t time = in.time();
  for (std::size_t o = 0; o < out_ch; ++o) {
    const T* g = grad_out.plane(o).data();
    T bias_sum{};
    for (std::size_t i = 0; i < grad_out.plane_size(); ++i) bias_sum += g[i];
    grad_layer->bias[o] += bias_sum;
    for (std::size_t c = 0; c < in_ch; ++c) {
      const T* x = in.plane(c).data();
      T* gx = grad_in->plane(c).data();
      for (std::size_t j = 0; j < 2; ++j) {
        const T w = layer.kernel[(o * in_ch + c) * 2 + j];
        T sum{};
        for (std::size_t f = 0; f < freq; ++f) {
          const T* g_row = g + (2 * f + j) * time;
          const T* x_row = x + f * time;
          T* gx_row = gx + f * time;
          for (std::size_t t = 0; t < time; ++t) {
            sum += g_row[t] * x_row[t];
            gx_row[t] += w * g_row[t];
          }
        }
        grad_layer->kernel[(o * in_ch + c) * 2 + j] += sum;
      }
    }
  }
}

#define UNETAEC_INSTANTIATE_LAYERS(T)                                        \
  template void Conv2d(const Tensor<T>&, const ConvLayer<T>&, Activation,    \
                       Tensor<T>*, const Tensor<T>*, std::vector<T>*);       \
  template Tensor<T> Conv2d(const Tensor<T>&, const ConvLayer<T>&,           \
                            Activation);                                     \
  template void MaxPoolFreq(const Tensor<T>&, Tensor<T>*);                   \
  template Tensor<T> MaxPoolFreq(const Tensor<T>&);                          \
  template void UpsampleFreq(const Tensor<T>&, const ConvLayer<T>&,          \
                             Tensor<T>*, std::vector<T>*);                   \
  template Tensor<T> UpsampleFreq(const Tensor<T>&, const ConvLayer<T>&);    \
  template void Concat(const Tensor<T>&, const Tensor<T>&, Tensor<T>*);      \
  template void Add(const Tensor<T>&, const Tensor<T>&, Tensor<T>*);         \
  template Tensor<T> ResidualBlock(const Tensor<T>&,                         \
                                   std::span<const ConvLayer<T>>,            \
                                   ResidualConfig, int);                     \
  template void Conv2dBackward(const Tensor<T>&, const Tensor<T>&,           \
                               const Tensor<T>&, const ConvLayer<T>&,        \
                               Activation, Tensor<T>*, ConvLayer<T>*,        \
                               std::vector<T>*);                             \
  template void MaxPoolFreqBackward(const Tensor<T>&, const Tensor<T>&,      \
                                    Tensor<T>*);                             \
  template void UpsampleFreqBackward(const Tensor<T>&, const Tensor<T>&,     \
                                     const ConvLayer<T>&, Tensor<T>*,        \
                                     ConvLayer<T>*);

UNETAEC_INSTANTIATE_LAYERS(float)
UNETAEC_INSTANTIATE_LAYERS(double)

#undef UNETAEC_INSTANTIATE_LAYERS

}  // namespace unetaec
