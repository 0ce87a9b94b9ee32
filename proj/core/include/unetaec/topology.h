#ifndef UNETAEC_TOPOLOGY_H_
#define UNETAEC_TOPOLOGY_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace unetaec {

// Conf1: out = a + stack(a). Conf2: out = shortcut_conv(a) + stack(a).
// `a` is the 3x3 ReLU conv that maps the block input to the level's filters.
enum class ResidualConfig : std::int32_t { kConf1 = 1, kConf2 = 2 };

struct NetTopology {
  int num_encoders = 4;
  int num_decoders = 3;
  int base_filters = 16;
  ResidualConfig residual_config = ResidualConfig::kConf1;
  int residual_depth = 2;  // N stacked 3x3 convs inside a residual block
  int kernel_size = 3;
  int pool_size = 2;  // along frequency only
  int in_channels = 2;

  // Throws std::invalid_argument if the fields are inconsistent.
  void Validate() const;
  int FiltersAt(int level) const { return base_filters << level; }
  // Frequency size must be divisible by this for the pooling chain.
  std::size_t FreqDivisor() const {
    return std::size_t{1} << (num_encoders - 1);
  }

  friend bool operator==(const NetTopology&, const NetTopology&) = default;
};

enum class LayerKind : std::uint8_t {
  kConv,      // kernel_h x kernel_w, same padding, stride 1
  kUpsample,  // transposed conv, kernel 2x1, stride 2x1 along frequency
};

enum class Activation : std::uint8_t { kLinear, kRelu };

struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::kConv;
  int in_channels = 0;
  int out_channels = 0;
  int kernel_h = 3;
  int kernel_w = 3;
  Activation activation = Activation::kRelu;

  std::size_t kernel_elements() const {
    return static_cast<std::size_t>(out_channels) * in_channels * kernel_h *
           kernel_w;
  }
  std::size_t param_count() const {
    return kernel_elements() + static_cast<std::size_t>(out_channels);
  }
};

// Layers in the canonical order used by forward, backward and the weight
// file:
//   encoder level i = 0..E-1:  enc{i}.in, enc{i}.stack{0..N-1}[, enc{i}.shortcut]
//   decoder level i = E-2..0:  dec{i}.up, dec{i}.in, dec{i}.stack{..}[, dec{i}.shortcut]
//   out (1x1, linear, clamped at 0)
std::vector<LayerSpec> EnumerateLayers(const NetTopology& topology);

std::size_t ParamCount(const NetTopology& topology);

std::string ToString(ResidualConfig config);
std::string Describe(const NetTopology& topology);

// The configuration selected by the hyperparameter search: F0=16, 4-3,
// Conf1, N=2.
NetTopology DefaultTopology();

}  // namespace unetaec

#endif  // UNETAEC_TOPOLOGY_H_
