#ifndef UNETAEC_WEIGHTS_H_
#define UNETAEC_WEIGHTS_H_

#include <cstdint>
#include <filesystem>
#include <vector>

#include "unetaec/topology.h"

namespace unetaec {

enum class Precision : std::uint8_t { kFp32 = 0, kFp16 = 1 };

std::string ToString(Precision precision);
// Accepts "fp32" or "fp16".
Precision ParsePrecision(const std::string& text);

// Kernel layout is [out][in][kh][kw].
template <typename T>
struct ConvLayer {
  LayerSpec spec;
  std::vector<T> kernel;
  std::vector<T> bias;
};

template <typename T>
struct NetParams {
  NetTopology topology;
  std::vector<ConvLayer<T>> layers;

  // Zero-filled tensors shaped for `topology`.
  static NetParams Zeros(const NetTopology& topology) {
    NetParams params;
    params.topology = topology;
    for (auto& spec : EnumerateLayers(topology)) {
      ConvLayer<T> layer;
      layer.kernel.assign(spec.kernel_elements(), T{});
      layer.bias.assign(static_cast<std::size_t>(spec.out_channels), T{});
      layer.spec = std::move(spec);
      params.layers.push_back(std::move(layer));
    }
    return params;
  }

  std::size_t param_count() const {
    std::size_t total = 0;
    for (const auto& layer : layers) {
      total += layer.kernel.size() + layer.bias.size();
    }
    return total;
  }

  // Visits every scalar in canonical order.
  template <typename Fn>
  void ForEach(Fn&& fn) {
    for (auto& layer : layers) {
      for (auto& v : layer.kernel) fn(v);
      for (auto& v : layer.bias) fn(v);
    }
  }
  template <typename Fn>
  void ForEach(Fn&& fn) const {
    for (const auto& layer : layers) {
      for (const auto& v : layer.kernel) fn(v);
      for (const auto& v : layer.bias) fn(v);
    }
  }
};

template <typename To, typename From>
NetParams<To> CastParams(const NetParams<From>& from) {
  NetParams<To> to;
  to.topology = from.topology;
  to.layers.reserve(from.layers.size());
  for (const auto& layer : from.layers) {
    ConvLayer<To> out;
    out.spec = layer.spec;
    out.kernel.assign(layer.kernel.begin(), layer.kernel.end());
    out.bias.assign(layer.bias.begin(), layer.bias.end());
    to.layers.push_back(std::move(out));
  }
  return to;
}

// Checks that every tensor is shaped for the topology and finite.
template <typename T>
void ValidateParams(const NetParams<T>& params);

// Immutable once built; share freely between threads.
struct NetWeights {
  NetParams<float> params;
  Precision precision = Precision::kFp32;
  // Scalars clamped to +-65504 by QuantizeFp16.
  std::size_t saturated_count = 0;

  const NetTopology& topology() const { return params.topology; }
  // Bytes needed to store the scalars at the tagged precision.
  std::size_t storage_bytes() const {
    return params.param_count() * (precision == Precision::kFp16 ? 2 : 4);
  }
};

// He-normal kernels (std = sqrt(2 / fan_in)), zero biases.
NetWeights RandomWeights(const NetTopology& topology, std::uint64_t seed);
NetWeights ZeroWeights(const NetTopology& topology);

// Rounds every scalar to the nearest half-precision value, saturating at
// +-65504, and tags the result fp16.
NetWeights QuantizeFp16(const NetWeights& weights);

// Little-endian binary file:
//   "UNETAEC1", int32 version (1),
//   int32 num_encoders, num_decoders, base_filters, residual_config,
//         residual_depth, kernel_size, pool_size, in_channels,
//   uint8 model precision, uint32 layer count,
//   per layer in EnumerateLayers order, kernel then bias:
//     uint8 precision tag (0 fp32, 1 fp16), uint32 element count, payload.
// Throws FormatError on bad magic/version, shape mismatch or truncation.
void SaveWeights(const NetWeights& weights, const std::filesystem::path& path);
NetWeights LoadWeights(const std::filesystem::path& path);

}  // namespace unetaec

#endif  // UNETAEC_WEIGHTS_H_
