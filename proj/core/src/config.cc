#include "unetaec/config.h"

#include <fstream>
#include <stdexcept>

#include "unetaec/common.h"

namespace unetaec {
namespace {

std::string Trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

Config Config::Parse(std::istream& in, const std::string& source) {
  Config config;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = Trim(line);
    if (text.empty() || text[0] == '#') continue;
    const auto eq = text.find('=');
    const std::string where = source + ":" + std::to_string(line_no);
    if (eq == std::string::npos) {
      throw FormatError(where + ": expected 'key = value'");
    }
    const std::string key = Trim(text.substr(0, eq));
    const std::string value = Trim(text.substr(eq + 1));
    if (key.empty()) throw FormatError(where + ": empty key");
    if (config.Has(key)) throw FormatError(where + ": duplicate key '" + key + "'");
    config.values_[key] = value;
  }
  return config;
}

Config Config::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config '" + path.string() + "'");
  return Parse(in, path.string());
}

void Config::Set(const std::string& key, const std::string& value) {
  values_[key] = value;
}

std::optional<std::string> Config::GetString(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return std::nullopt;
  used_.insert(key);
  return it->second;
}

std::optional<double> Config::GetDouble(const std::string& key) const {
  const auto text = GetString(key);
  if (!text) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(*text, &used);
    if (used == text->size()) return v;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("config: '" + key + "' expects a number, got '" +
                              *text + "'");
}

std::optional<long long> Config::GetInt(const std::string& key) const {
  const auto text = GetString(key);
  if (!text) return std::nullopt;
  try {
    std::size_t used = 0;
    const long long v = std::stoll(*text, &used);
    if (used == text->size()) return v;
  } catch (const std::exception&) {
  }
  throw std::invalid_argument("config: '" + key + "' expects an integer, got '" +
                              *text + "'");
}

std::vector<std::string> Config::Unused() const {
  std::vector<std::string> out;
  for (const auto& [key, value] : values_) {
    if (!used_.count(key)) out.push_back(key);
  }
  return out;
}

void ApplyConfig(const Config& config, EngineConfig* engine) {
  if (auto v = config.GetString("engine")) engine->engine = ParseEngineKind(*v);
  if (auto v = config.GetString("weights")) engine->weights = *v;
  if (auto v = config.GetString("precision")) engine->precision = ParsePrecision(*v);
  if (auto v = config.GetInt("stride")) engine->stride = static_cast<int>(*v);
  if (auto v = config.GetInt("frame")) engine->frame = static_cast<int>(*v);
  if (auto v = config.GetInt("num_taps")) {
    Require(*v > 0, "config: num_taps must be positive");
    engine->pfblms.num_taps = static_cast<std::size_t>(*v);
  }
  if (auto v = config.GetInt("block_size")) {
    Require(*v > 0, "config: block_size must be positive");
    engine->pfblms.block_size = static_cast<std::size_t>(*v);
  }
  if (auto v = config.GetDouble("mu")) engine->pfblms.mu = *v;
}

void ApplyConfig(const Config& config, OptimizerConfig* optimizer) {
  if (auto v = config.GetString("optimizer")) {
    optimizer->kind = ParseOptimizerKind(*v);
  }
  if (auto v = config.GetDouble("learning_rate")) optimizer->learning_rate = *v;
  if (auto v = config.GetDouble("beta1")) optimizer->beta1 = *v;
  if (auto v = config.GetDouble("beta2")) optimizer->beta2 = *v;
  if (auto v = config.GetDouble("eps")) optimizer->eps = *v;
  if (auto v = config.GetDouble("momentum")) optimizer->momentum = *v;
  optimizer->Validate();
}

void ApplyConfig(const Config& config, TrainOptions* options) {
  if (auto v = config.GetInt("epochs")) options->epochs = static_cast<int>(*v);
  if (auto v = config.GetInt("batch")) options->batch = static_cast<int>(*v);
  if (auto v = config.GetInt("seed")) options->seed = static_cast<std::uint64_t>(*v);
  if (auto v = config.GetInt("tf_frames")) options->loss.tf_frames = static_cast<int>(*v);
}

}  // namespace unetaec
