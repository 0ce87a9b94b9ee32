#include "unetaec/topology.h"

#include <sstream>

#include "unetaec/common.h"

namespace unetaec {
namespace {

void AppendBlock(const std::string& prefix, int in_channels, int filters,
                 const NetTopology& topology, std::vector<LayerSpec>* layers) {
  layers->push_back({prefix + ".in", LayerKind::kConv, in_channels, filters,
                     topology.kernel_size, topology.kernel_size,
                     Activation::kRelu});
  for (int j = 0; j < topology.residual_depth; ++j) {
    layers->push_back({prefix + ".stack" + std::to_string(j),
                       LayerKind::kConv, filters, filters,
                       topology.kernel_size, topology.kernel_size,
                       Activation::kRelu});
  }
  if (topology.residual_config == ResidualConfig::kConf2) {
    layers->push_back({prefix + ".shortcut", LayerKind::kConv, filters,
                       filters, topology.kernel_size, topology.kernel_size,
                       Activation::kLinear});
  }
}

}  // namespace

void NetTopology::Validate() const {
  Require(num_encoders >= 1 && num_encoders <= 8,
          "topology: num_encoders must be in [1, 8]");
  Require(num_decoders == num_encoders - 1,
          "topology: num_decoders must equal num_encoders - 1");
  Require(base_filters >= 1 && base_filters <= 1024,
          "topology: base_filters must be in [1, 1024]");
  Require(residual_config == ResidualConfig::kConf1 ||
              residual_config == ResidualConfig::kConf2,
          "topology: residual_config must be Conf1 or Conf2");
  Require(residual_depth >= 1 && residual_depth <= 16,
          "topology: residual_depth must be in [1, 16]");
  Require(kernel_size == 3, "topology: only 3x3 kernels are supported");
  Require(pool_size == 2, "topology: only 2x1 frequency pooling is supported");
  Require(in_channels >= 1, "topology: in_channels must be positive");
}

std::vector<LayerSpec> EnumerateLayers(const NetTopology& topology) {
  topology.Validate();
  std::vector<LayerSpec> layers;
  for (int i = 0; i < topology.num_encoders; ++i) {
    const int in = i == 0 ? topology.in_channels : topology.FiltersAt(i - 1);
    AppendBlock("enc" + std::to_string(i), in, topology.FiltersAt(i), topology,
                &layers);
  }
  for (int i = topology.num_encoders - 2; i >= 0; --i) {
    const std::string prefix = "dec" + std::to_string(i);
    layers.push_back({prefix + ".up", LayerKind::kUpsample,
                      topology.FiltersAt(i + 1), topology.FiltersAt(i),
                      topology.pool_size, 1, Activation::kLinear});
    AppendBlock(prefix, 2 * topology.FiltersAt(i), topology.FiltersAt(i),
                topology, &layers);
  }
  layers.push_back({"out", LayerKind::kConv, topology.base_filters, 1, 1, 1,
                    Activation::kLinear});
  return layers;
}

std::size_t ParamCount(const NetTopology& topology) {
  std::size_t total = 0;
  for (const auto& layer : EnumerateLayers(topology)) {
    total += layer.param_count();
  }
  return total;
}

std::string ToString(ResidualConfig config) {
  return config == ResidualConfig::kConf1 ? "conf1" : "conf2";
}

std::string Describe(const NetTopology& topology) {
  std::ostringstream out;
  out << "encoders=" << topology.num_encoders
      << " decoders=" << topology.num_decoders
      << " base_filters=" << topology.base_filters
      << " residual=" << ToString(topology.residual_config)
      << " residual_depth=" << topology.residual_depth
      << " kernel=" << topology.kernel_size << "x" << topology.kernel_size
      << " pool=" << topology.pool_size << "x1"
      << " in_channels=" << topology.in_channels;
  return out.str();
}

NetTopology DefaultTopology() { return NetTopology{}; }

}  // namespace unetaec
