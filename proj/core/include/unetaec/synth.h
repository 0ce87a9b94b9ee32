#ifndef UNETAEC_SYNTH_H_
#define UNETAEC_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "unetaec/audio_buffer.h"

namespace unetaec {

// Filtered Gaussian noise with a speech-like spectral tilt, amplitude
// modulated at a syllabic rate (about 4 Hz) and optionally gated into
// talk spurts and pauses. Active RMS is set to `level_dbfs`.
struct SpeechNoiseOptions {
  double level_dbfs = -20.0;
  bool syllabic_modulation = true;
  bool pauses = true;
};

std::vector<double> SpeechShapedNoise(std::size_t num_samples,
                                      std::uint64_t seed,
                                      const SpeechNoiseOptions& options = {});

// Gaussian noise under an exp(-t/tau) envelope, tau = decay_ms (at least one
// sample), with the first tap forced to dominate and unit total energy.
// Length is round(length_ms * 16) taps.
std::vector<double> GenRir(double length_ms, double decay_ms,
                           std::uint64_t seed);

struct Nonlinearity {
  enum class Kind { kNone, kHardClip };
  Kind kind = Kind::kNone;
  double threshold = 1.0;

  static Nonlinearity None() { return {}; }
  static Nonlinearity HardClip(double threshold) {
    return {Kind::kHardClip, threshold};
  }
};

// hard_clip(c): max(-c, min(c, x)). Throws if c <= 0.
std::vector<double> ApplyNonlinearity(std::span<const double> x,
                                      const Nonlinearity& nonlinearity);

enum class Scenario { kSingleTalkFar, kSingleTalkNear, kDoubleTalk };

std::string ToString(Scenario scenario);
Scenario ParseScenario(const std::string& text);

struct MixtureSpec {
  Scenario scenario = Scenario::kDoubleTalk;
  double ser_db = 0.0;
  std::optional<double> near_noise_snr_db;
  std::optional<double> far_noise_snr_db;
  Nonlinearity nonlinearity;
  std::vector<double> rir{1.0};
  // Recorded for the manifest only.
  double rir_length_ms = 0.0;
  double rir_decay_ms = 0.0;
};

// y == s + d + v sample-wise.
struct SyntheticSample {
  AudioBuffer far_end;  // x
  AudioBuffer echo;     // d
  AudioBuffer mic;      // y
  AudioBuffer near_end; // s
  AudioBuffer noise;    // v
  MixtureSpec spec;
};

// Linear convolution truncated to the length of `signal`.
std::vector<double> Convolve(std::span<const double> signal,
                             std::span<const double> filter);

// Builds y = s + f(x) + v. For double talk the echo is scaled so that the
// SER over frames where s is above -40 dBFS equals spec.ser_db. Far-end
// noise is added to x before the echo path; near-end noise is white and set
// relative to the active near-end power (or the echo power when s is
// silent). If any of x, y, s, d peaks above 0.99 all signals are scaled
// down together. Lengths are trimmed to the shorter input.
SyntheticSample Mix(std::span<const double> near, std::span<const double> far,
                    const MixtureSpec& spec, std::uint64_t seed);

struct CorpusOptions {
  std::size_t num_samples = 0;
  std::uint64_t seed = 0;
  double duration_s = 4.0;
  // Optional directory of 16 kHz mono 16-bit WAV files used as speech
  // sources; speech-shaped noise otherwise.
  std::optional<std::filesystem::path> source_dir;
  // Forces every sample to one scenario; otherwise half double talk and a
  // quarter each of far-only and near-only.
  std::optional<Scenario> scenario;
  // When false the drawn noise levels / clipping are recorded as unset, so
  // the echo path stays linear and noise free.
  bool noise = true;
  bool nonlinearity = true;
};

// Generates the sample at `index` independently of all other indices.
class CorpusGenerator {
 public:
  explicit CorpusGenerator(CorpusOptions options);
  SyntheticSample Generate(std::size_t index) const;
  const CorpusOptions& options() const { return options_; }

 private:
  std::vector<double> SourceSpeech(std::uint64_t seed,
                                   std::size_t length) const;

  CorpusOptions options_;
  std::vector<std::vector<double>> sources_;
};

struct ManifestRow {
  std::size_t index = 0;
  Scenario scenario = Scenario::kDoubleTalk;
  double ser_db = 0.0;
  std::optional<double> near_noise_snr_db;
  std::optional<double> far_noise_snr_db;
  Nonlinearity nonlinearity;
  double rir_length_ms = 0.0;
  double rir_decay_ms = 0.0;
  // Relative to the manifest's directory.
  std::string farend;
  std::string echo;
  std::string mic;
  std::string nearend;
};

inline constexpr const char* kManifestName = "meta.csv";

// Writes farend/echo/mic/nearend WAV quadruples plus meta.csv into
// `out_dir` (created if needed) and returns the manifest rows.
std::vector<ManifestRow> GenCorpus(const CorpusOptions& options,
                                   const std::filesystem::path& out_dir);

void WriteManifest(std::ostream& out, const std::vector<ManifestRow>& rows);
// Throws FormatError (with the line number) on malformed rows.
std::vector<ManifestRow> ReadManifest(std::istream& in);
std::vector<ManifestRow> ReadManifest(const std::filesystem::path& path);

}  // namespace unetaec

#endif  // UNETAEC_SYNTH_H_
