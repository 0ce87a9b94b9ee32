#include "unetaec/wav.h"

#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <vector>

#include "unetaec/common.h"

namespace unetaec {
namespace {

constexpr double kPcmScale = 32768.0;

std::uint32_t ReadU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t ReadU16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void PutU32(std::vector<unsigned char>* out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out->push_back(static_cast<unsigned char>(v >> (8 * i)));
}

void PutU16(std::vector<unsigned char>* out, std::uint16_t v) {
  out->push_back(static_cast<unsigned char>(v & 0xFF));
  out->push_back(static_cast<unsigned char>(v >> 8));
}

std::int16_t ToPcm(double v) {
  const double scaled = std::nearbyint(v * kPcmScale);
  if (!(scaled >= -32768.0)) return -32768;  // also catches NaN
  if (scaled > 32767.0) return 32767;
  return static_cast<std::int16_t>(scaled);
}

}  // namespace

AudioBuffer ReadWav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  const std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                         std::istreambuf_iterator<char>());
  const std::string where = " in '" + path.string() + "'";
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
      std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    throw FormatError("not a RIFF/WAVE file" + where);
  }

  bool have_format = false;
  int rate = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = ReadU32(chunk + 4);
    const std::size_t body = pos + 8;
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16 || body + 16 > bytes.size()) {
        throw FormatError("truncated fmt chunk" + where);
      }
      const unsigned char* f = bytes.data() + body;
      const std::uint16_t format = ReadU16(f);
      const std::uint16_t channels = ReadU16(f + 2);
      const std::uint16_t bits = ReadU16(f + 14);
      std::uint16_t tag = format;
      // WAVE_FORMAT_EXTENSIBLE stores the real format in the sub-format GUID.
      if (format == 0xFFFE && size >= 40 && body + 26 <= bytes.size()) {
        tag = ReadU16(f + 24);
      }
      if (tag != 1 || bits != 16) {
        throw FormatError("only 16-bit PCM is supported" + where);
      }
      if (channels != 1) {
        throw FormatError("expected mono audio, found " +
                          std::to_string(channels) + " channels" + where);
      }
      rate = static_cast<int>(ReadU32(f + 4));
      have_format = true;
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      if (!have_format) throw FormatError("data chunk before fmt chunk" + where);
      if (body + size > bytes.size()) throw FormatError("truncated data chunk" + where);
      AudioBuffer audio;
      audio.sample_rate = rate;
      audio.samples.resize(size / 2);
      for (std::size_t i = 0; i < audio.samples.size(); ++i) {
        const auto code = static_cast<std::int16_t>(ReadU16(bytes.data() + body + 2 * i));
        audio.samples[i] = static_cast<double>(code) / kPcmScale;
      }
      if (rate <= 0) throw FormatError("invalid sample rate" + where);
      return audio;
    }
    pos = body + size + (size & 1);
  }
  throw FormatError("no data chunk" + where);
}

void WriteWav(const std::filesystem::path& path, const AudioBuffer& audio) {
  Require(audio.sample_rate > 0, "wav: sample_rate must be positive");
  const std::size_t data_bytes = audio.samples.size() * 2;
  Require(data_bytes <= 0xFFFFFFFFu - 36, "wav: audio too long for RIFF");

  std::vector<unsigned char> out;
  out.reserve(44 + data_bytes);
  const auto append = [&out](const char* tag) { out.insert(out.end(), tag, tag + 4); };
  append("RIFF");
  PutU32(&out, static_cast<std::uint32_t>(36 + data_bytes));
  append("WAVE");
  append("fmt ");
  PutU32(&out, 16);
  PutU16(&out, 1);  // PCM
  PutU16(&out, 1);  // mono
  PutU32(&out, static_cast<std::uint32_t>(audio.sample_rate));
  PutU32(&out, static_cast<std::uint32_t>(audio.sample_rate) * 2);
  PutU16(&out, 2);
  PutU16(&out, 16);
  append("data");
  PutU32(&out, static_cast<std::uint32_t>(data_bytes));
  for (double v : audio.samples) {
    PutU16(&out, static_cast<std::uint16_t>(ToPcm(v)));
  }

  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot create '" + path.string() + "'");
  file.write(reinterpret_cast<const char*>(out.data()),
             static_cast<std::streamsize>(out.size()));
  if (!file) throw std::runtime_error("write failed for '" + path.string() + "'");
}

AudioBuffer QuantizePcm16(const AudioBuffer& audio) {
  AudioBuffer out;
  out.sample_rate = audio.sample_rate;
  out.samples.reserve(audio.samples.size());
  for (double v : audio.samples) {
    out.samples.push_back(static_cast<double>(ToPcm(v)) / kPcmScale);
  }
  return out;
}

}  // namespace unetaec
