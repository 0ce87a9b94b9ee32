#include "unetaec/weights.h"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "unetaec/common.h"
#include "unetaec/fp16.h"
#include "unetaec/random.h"

namespace unetaec {
namespace {

constexpr std::array<char, 8> kMagic = {'U', 'N', 'E', 'T', 'A', 'E', 'C', '1'};
constexpr std::int32_t kVersion = 1;

template <typename U>
U ToLittleEndian(U value) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<std::uint8_t, sizeof(U)>>(value);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<U>(bytes);
  }
  return value;
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path)
      : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw std::runtime_error("cannot open " + path.string());
  }
  template <typename U>
  void Put(U value) {
    value = ToLittleEndian(value);
    out_.write(reinterpret_cast<const char*>(&value), sizeof(U));
  }
  void PutBytes(const char* data, std::size_t n) { out_.write(data, n); }
  void Finish() {
    out_.flush();
    if (!out_) throw std::runtime_error("write failed: " + path_.string());
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path)
      : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw std::runtime_error("cannot open " + path.string());
  }
  template <typename U>
  U Get() {
    U value;
    in_.read(reinterpret_cast<char*>(&value), sizeof(U));
    if (in_.gcount() != static_cast<std::streamsize>(sizeof(U))) {
      throw FormatError(path_.string() + ": truncated weight file");
    }
    return ToLittleEndian(value);
  }
  void GetBytes(char* data, std::size_t n) {
    in_.read(data, static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw FormatError(path_.string() + ": truncated weight file");
    }
  }
  bool AtEnd() { return in_.peek() == std::char_traits<char>::eof(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

void WriteTensor(Writer& writer, const std::vector<float>& values,
                 Precision precision) {
  writer.Put(static_cast<std::uint8_t>(precision));
  writer.Put(static_cast<std::uint32_t>(values.size()));
  for (float v : values) {
    if (precision == Precision::kFp16) {
      writer.Put(FloatToHalf(v));
    } else {
      writer.Put(std::bit_cast<std::uint32_t>(v));
    }
  }
}

void ReadTensor(Reader& reader, const std::string& what, std::size_t expected,
                std::vector<float>* values) {
  const auto tag = reader.Get<std::uint8_t>();
  if (tag > 1) {
    throw FormatError(reader.path().string() + ": bad precision tag on " + what);
  }
  const auto count = reader.Get<std::uint32_t>();
  if (count != expected) {
    std::ostringstream msg;
    msg << reader.path().string() << ": " << what << " holds " << count
        << " values, topology expects " << expected;
    throw FormatError(msg.str());
  }
  values->resize(count);
  for (auto& v : *values) {
    v = tag == 1 ? HalfToFloat(reader.Get<std::uint16_t>())
                 : std::bit_cast<float>(reader.Get<std::uint32_t>());
  }
}

}  // namespace

std::string ToString(Precision precision) {
  return precision == Precision::kFp16 ? "fp16" : "fp32";
}

Precision ParsePrecision(const std::string& text) {
  if (text == "fp32") return Precision::kFp32;
  if (text == "fp16") return Precision::kFp16;
  throw std::invalid_argument("unknown precision '" + text +
                              "' (expected fp32 or fp16)");
}

template <typename T>
void ValidateParams(const NetParams<T>& params) {
  const auto specs = EnumerateLayers(params.topology);
  Require(specs.size() == params.layers.size(),
          "weights: layer count does not match topology");
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& layer = params.layers[i];
    Require(layer.kernel.size() == specs[i].kernel_elements() &&
                layer.bias.size() ==
                    static_cast<std::size_t>(specs[i].out_channels),
            "weights: tensor shape mismatch in layer " + specs[i].name);
    for (const T& v : layer.kernel) {
      Require(std::isfinite(static_cast<double>(v)),
              "weights: non-finite kernel value in " + specs[i].name);
    }
    for (const T& v : layer.bias) {
      Require(std::isfinite(static_cast<double>(v)),
              "weights: non-finite bias value in " + specs[i].name);
    }
  }
}

template void ValidateParams(const NetParams<float>&);
template void ValidateParams(const NetParams<double>&);

NetWeights ZeroWeights(const NetTopology& topology) {
  NetWeights weights;
  weights.params = NetParams<float>::Zeros(topology);
  return weights;
}

NetWeights RandomWeights(const NetTopology& topology, std::uint64_t seed) {
  NetWeights weights = ZeroWeights(topology);
  Rng rng(seed);
  for (auto& layer : weights.params.layers) {
    const double fan_in = static_cast<double>(layer.spec.in_channels) *
                          layer.spec.kernel_h * layer.spec.kernel_w;
    const double stddev = std::sqrt(2.0 / fan_in);
    for (auto& v : layer.kernel) v = static_cast<float>(stddev * rng.Normal());
  }
  return weights;
}

NetWeights QuantizeFp16(const NetWeights& weights) {
  NetWeights out = weights;
  out.precision = Precision::kFp16;
  out.saturated_count = 0;
  out.params.ForEach([&](float& v) {
    bool saturated = false;
    v = RoundToHalf(v, &saturated);
    if (saturated) ++out.saturated_count;
  });
  return out;
}

void SaveWeights(const NetWeights& weights, const std::filesystem::path& path) {
  ValidateParams(weights.params);
  const NetTopology& t = weights.topology();
  Writer writer(path);
  writer.PutBytes(kMagic.data(), kMagic.size());
  writer.Put(kVersion);
  for (std::int32_t field :
       {t.num_encoders, t.num_decoders, t.base_filters,
        static_cast<std::int32_t>(t.residual_config), t.residual_depth,
        t.kernel_size, t.pool_size, t.in_channels}) {
    writer.Put(field);
  }
  writer.Put(static_cast<std::uint8_t>(weights.precision));
  writer.Put(static_cast<std::uint32_t>(weights.params.layers.size()));
  for (const auto& layer : weights.params.layers) {
    WriteTensor(writer, layer.kernel, weights.precision);
    WriteTensor(writer, layer.bias, weights.precision);
  }
  writer.Finish();
}

NetWeights LoadWeights(const std::filesystem::path& path) {
  Reader reader(path);
  std::array<char, 8> magic{};
  reader.GetBytes(magic.data(), magic.size());
  if (magic != kMagic) {
    throw FormatError(path.string() + ": not a UNETAEC1 weight file");
  }
  const auto version = reader.Get<std::int32_t>();
  if (version != kVersion) {
    throw FormatError(path.string() + ": unsupported weight file version " +
                      std::to_string(version));
  }
  NetTopology t;
  t.num_encoders = reader.Get<std::int32_t>();
  t.num_decoders = reader.Get<std::int32_t>();
  t.base_filters = reader.Get<std::int32_t>();
  t.residual_config = static_cast<ResidualConfig>(reader.Get<std::int32_t>());
  t.residual_depth = reader.Get<std::int32_t>();
  t.kernel_size = reader.Get<std::int32_t>();
  t.pool_size = reader.Get<std::int32_t>();
  t.in_channels = reader.Get<std::int32_t>();
  try {
    t.Validate();
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  const auto precision = reader.Get<std::uint8_t>();
  if (precision > 1) {
    throw FormatError(path.string() + ": bad model precision tag");
  }
  NetWeights weights = ZeroWeights(t);
  weights.precision = static_cast<Precision>(precision);
  const auto layer_count = reader.Get<std::uint32_t>();
  if (layer_count != weights.params.layers.size()) {
    throw FormatError(path.string() + ": layer count does not match topology");
  }
  for (auto& layer : weights.params.layers) {
    ReadTensor(reader, layer.spec.name + ".kernel", layer.kernel.size(),
               &layer.kernel);
    ReadTensor(reader, layer.spec.name + ".bias", layer.bias.size(),
               &layer.bias);
  }
  if (!reader.AtEnd()) {
    throw FormatError(path.string() + ": trailing bytes after last layer");
  }
  try {
    ValidateParams(weights.params);
  } catch (const std::invalid_argument& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return weights;
}

}  // namespace unetaec
