#ifndef UNETAEC_CONFIG_H_
#define UNETAEC_CONFIG_H_

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "unetaec/stream.h"
#include "unetaec/train.h"

namespace unetaec {

// Flat `key = value` settings, one per line. Blank lines and lines starting
// with '#' are ignored; surrounding whitespace is trimmed. Keys are the
// field names of EngineConfig, OptimizerConfig and TrainOptions (plus
// `optimizer` for the optimizer kind and `seed`).
class Config {
 public:
  Config() = default;

  // Throws FormatError naming the line for malformed or duplicate keys.
  static Config Parse(std::istream& in, const std::string& source = "config");
  static Config Load(const std::filesystem::path& path);

  void Set(const std::string& key, const std::string& value);
  bool Has(const std::string& key) const { return values_.count(key) > 0; }

  // Typed getters mark the key as used. They throw std::invalid_argument
  // when the value does not parse.
  std::optional<std::string> GetString(const std::string& key) const;
  std::optional<double> GetDouble(const std::string& key) const;
  std::optional<long long> GetInt(const std::string& key) const;

  // Keys present but never read.
  std::vector<std::string> Unused() const;

 private:
  std::map<std::string, std::string> values_;
  mutable std::set<std::string> used_;
};

void ApplyConfig(const Config& config, EngineConfig* engine);
void ApplyConfig(const Config& config, OptimizerConfig* optimizer);
void ApplyConfig(const Config& config, TrainOptions* options);

}  // namespace unetaec

#endif  // UNETAEC_CONFIG_H_
