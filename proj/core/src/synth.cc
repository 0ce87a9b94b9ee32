#include "unetaec/synth.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "unetaec/common.h"
#include "unetaec/fft.h"
#include "unetaec/metrics.h"
#include "unetaec/random.h"
#include "unetaec/wav.h"

namespace unetaec {
namespace {

constexpr double kPeakLimit = 0.99;
constexpr double kSamplesPerMs = kSampleRateHz / 1000.0;

double MeanSquare(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double sum = 0.0;
  for (double v : x) sum += v * v;
  return sum / static_cast<double>(x.size());
}

double Peak(std::span<const double> x) {
  double peak = 0.0;
  for (double v : x) peak = std::max(peak, std::abs(v));
  return peak;
}

// Mean square over the frames marked active, or 0 if there are none.
double ActiveMeanSquare(std::span<const double> x) {
  const ActivityMask mask = ComputeActivityMask(x);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t f = 0; f < mask.size(); ++f) {
    if (!mask.active[f]) continue;
    for (std::size_t i = f * kStrideSamples; i < (f + 1) * kStrideSamples; ++i) {
      sum += x[i] * x[i];
    }
    n += kStrideSamples;
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

std::vector<double> WhiteNoise(std::size_t n, double rms, Rng& rng) {
  std::vector<double> out(n);
  for (double& v : out) v = rms * rng.Normal();
  return out;
}

std::string FormatOptional(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s << *v;
  return s.str();
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

}  // namespace

std::vector<double> SpeechShapedNoise(std::size_t num_samples,
                                      std::uint64_t seed,
                                      const SpeechNoiseOptions& options) {
  Rng rng(seed);
  std::vector<double> out(num_samples);
  // Spectral shape: a one-pole low-pass (about -6 dB/octave above 250 Hz)
  // followed by a DC-blocking high-pass.
  double lp = 0.0;
  double hp_in = 0.0;
  double hp = 0.0;
  for (double& v : out) {
    lp = 0.9 * lp + rng.Normal();
    hp = lp - hp_in + 0.995 * hp;
    hp_in = lp;
    v = hp;
  }

  std::vector<double> gain(num_samples, 1.0);
  if (options.syllabic_modulation) {
    const double rate_hz = rng.Uniform(3.0, 5.0);
    const double phase = rng.Uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t n = 0; n < num_samples; ++n) {
      const double t = static_cast<double>(n) / kSampleRateHz;
      const double s = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * rate_hz * t + phase));
      gain[n] = 0.15 + 0.85 * s;
    }
  }
  if (options.pauses) {
    // Alternating talk spurts (0.4-2 s) and pauses (0.15-0.8 s) with 10 ms
    // ramps at the edges.
    const std::size_t ramp = static_cast<std::size_t>(10 * kSamplesPerMs);
    std::size_t pos = 0;
    bool talking = rng.Uniform() < 0.8;
    std::vector<double> gate(num_samples, 0.0);
    while (pos < num_samples) {
      const double seconds = talking ? rng.Uniform(0.4, 2.0) : rng.Uniform(0.15, 0.8);
      const std::size_t len = std::max<std::size_t>(
          1, static_cast<std::size_t>(seconds * kSampleRateHz));
      const std::size_t end = std::min(num_samples, pos + len);
      if (talking) {
        for (std::size_t n = pos; n < end; ++n) {
          const double in = std::min(1.0, static_cast<double>(n - pos) / ramp);
          const double out_ramp = std::min(1.0, static_cast<double>(end - n) / ramp);
          gate[n] = std::min(in, out_ramp);
        }
      }
      pos = end;
      talking = !talking;
    }
    for (std::size_t n = 0; n < num_samples; ++n) gain[n] *= gate[n];
  }
  for (std::size_t n = 0; n < num_samples; ++n) out[n] *= gain[n];

  const double active = ActiveMeanSquare(out);
  const double reference = active > 0.0 ? active : MeanSquare(out);
  if (reference > 0.0) {
    const double target = std::pow(10.0, options.level_dbfs / 20.0);
    const double scale = target / std::sqrt(reference);
    for (double& v : out) v *= scale;
  }
  return out;
}

std::vector<double> GenRir(double length_ms, double decay_ms,
                           std::uint64_t seed) {
  Require(length_ms > 0.0 && std::isfinite(length_ms),
          "rir: length_ms must be positive");
  Require(decay_ms >= 0.0 && std::isfinite(decay_ms),
          "rir: decay_ms must be non-negative");
  const auto taps = static_cast<std::size_t>(
      std::max(1.0, std::round(length_ms * kSamplesPerMs)));
  const double tau = std::max(1.0, decay_ms * kSamplesPerMs);

  Rng rng(seed);
  std::vector<double> h(taps);
  double tail_peak = 0.0;
  for (std::size_t n = 0; n < taps; ++n) {
    h[n] = rng.Normal() * std::exp(-static_cast<double>(n) / tau);
    if (n > 0) tail_peak = std::max(tail_peak, std::abs(h[n]));
  }
  // Direct path: positive and at least twice any reflection.
  h[0] = std::max({std::abs(h[0]), 2.0 * tail_peak, 1e-3});
  double energy = 0.0;
  for (double v : h) energy += v * v;
  const double norm = 1.0 / std::sqrt(energy);
  for (double& v : h) v *= norm;
  return h;
}

std::vector<double> ApplyNonlinearity(std::span<const double> x,
                                      const Nonlinearity& nonlinearity) {
  std::vector<double> out(x.begin(), x.end());
  if (nonlinearity.kind == Nonlinearity::Kind::kNone) return out;
  const double c = nonlinearity.threshold;
  Require(c > 0.0 && std::isfinite(c), "nonlinearity: clip threshold must be positive");
  for (double& v : out) v = std::clamp(v, -c, c);
  return out;
}

std::string ToString(Scenario scenario) {
  switch (scenario) {
    case Scenario::kSingleTalkFar:
      return "single_talk_far";
    case Scenario::kSingleTalkNear:
      return "single_talk_near";
    case Scenario::kDoubleTalk:
      return "double_talk";
  }
  return "unknown";
}

Scenario ParseScenario(const std::string& text) {
  if (text == "single_talk_far") return Scenario::kSingleTalkFar;
  if (text == "single_talk_near") return Scenario::kSingleTalkNear;
  if (text == "double_talk") return Scenario::kDoubleTalk;
  throw std::invalid_argument("unknown scenario '" + text + "'");
}

std::vector<double> Convolve(std::span<const double> signal,
                             std::span<const double> filter) {
  std::vector<double> out(signal.size(), 0.0);
  if (signal.empty() || filter.empty()) return out;
  // Direct form is cheaper for short filters.
  if (filter.size() <= 32) {
    for (std::size_t n = 0; n < signal.size(); ++n) {
      double acc = 0.0;
      const std::size_t kmax = std::min(filter.size(), n + 1);
      for (std::size_t k = 0; k < kmax; ++k) acc += filter[k] * signal[n - k];
      out[n] = acc;
    }
    return out;
  }
  std::size_t size = 1;
  while (size < signal.size() + filter.size() - 1) size <<= 1;
  RealFft fft(size);
  std::vector<double> a(size, 0.0);
  std::vector<double> b(size, 0.0);
  std::copy(signal.begin(), signal.end(), a.begin());
  std::copy(filter.begin(), filter.end(), b.begin());
  std::vector<std::complex<double>> fa(fft.num_bins());
  std::vector<std::complex<double>> fb(fft.num_bins());
  fft.Forward(a, fa);
  fft.Forward(b, fb);
  for (std::size_t k = 0; k < fa.size(); ++k) fa[k] *= fb[k];
  fft.Inverse(fa, a);
  std::copy_n(a.begin(), out.size(), out.begin());
  return out;
}

SyntheticSample Mix(std::span<const double> near, std::span<const double> far,
                    const MixtureSpec& spec, std::uint64_t seed) {
  Require(!spec.rir.empty(), "mix: empty impulse response");
  Require(std::isfinite(spec.ser_db), "mix: ser_db must be finite");
  const std::size_t n = std::min(near.size(), far.size());
  Rng rng(seed);

  std::vector<double> s(near.begin(), near.begin() + n);
  std::vector<double> x(far.begin(), far.begin() + n);
  if (spec.scenario == Scenario::kSingleTalkFar) std::fill(s.begin(), s.end(), 0.0);
  if (spec.scenario == Scenario::kSingleTalkNear) std::fill(x.begin(), x.end(), 0.0);

  if (spec.far_noise_snr_db && spec.scenario != Scenario::kSingleTalkNear) {
    const double power = MeanSquare(x);
    if (power > 0.0) {
      const double rms = std::sqrt(power / std::pow(10.0, *spec.far_noise_snr_db / 10.0));
      const auto noise = WhiteNoise(n, rms, rng);
      for (std::size_t i = 0; i < n; ++i) x[i] += noise[i];
    }
  }

  std::vector<double> d = Convolve(ApplyNonlinearity(x, spec.nonlinearity), spec.rir);
  if (spec.scenario == Scenario::kDoubleTalk) {
    const double measured = MeasureSer(s, d);
    const double gain = std::pow(10.0, (measured - spec.ser_db) / 20.0);
    for (double& v : d) v *= gain;
  }

  std::vector<double> v(n, 0.0);
  if (spec.near_noise_snr_db) {
    double reference = ActiveMeanSquare(s);
    if (reference == 0.0) reference = MeanSquare(d);
    if (reference > 0.0) {
      const double rms =
          std::sqrt(reference / std::pow(10.0, *spec.near_noise_snr_db / 10.0));
      v = WhiteNoise(n, rms, rng);
    }
  }

  // Scaling everything down to respect the peak limit can move frames of s
  // across the activity threshold, which shifts the measured SER. Alternate
  // limiting and echo recalibration; s only ever shrinks, so this settles.
  std::vector<double> y(n);
  for (int pass = 0; pass < 16; ++pass) {
    for (std::size_t i = 0; i < n; ++i) y[i] = s[i] + d[i] + v[i];
    const double peak = std::max({Peak(y), Peak(x), Peak(s), Peak(d)});
    if (peak > kPeakLimit) {
      const double g = kPeakLimit / peak;
      for (auto* signal : {&x, &s, &d, &v}) {
        for (double& value : *signal) value *= g;
      }
    }
    if (spec.scenario != Scenario::kDoubleTalk) break;
    const double error_db = MeasureSer(s, d) - spec.ser_db;
    if (std::abs(error_db) < 1e-3) break;
    const double gain = std::pow(10.0, error_db / 20.0);
    for (double& value : d) value *= gain;
  }
  for (std::size_t i = 0; i < n; ++i) y[i] = s[i] + d[i] + v[i];

  SyntheticSample sample;
  sample.far_end = AudioBuffer(std::move(x));
  sample.echo = AudioBuffer(std::move(d));
  sample.mic = AudioBuffer(std::move(y));
  sample.near_end = AudioBuffer(std::move(s));
  sample.noise = AudioBuffer(std::move(v));
  sample.spec = spec;
  return sample;
}

CorpusGenerator::CorpusGenerator(CorpusOptions options)
    : options_(std::move(options)) {
  Require(options_.duration_s > 0.0, "corpus: duration must be positive");
  if (!options_.source_dir) return;
  const std::filesystem::path& dir = *options_.source_dir;
  if (!std::filesystem::is_directory(dir)) {
    throw std::runtime_error("corpus: source directory '" + dir.string() +
                             "' does not exist");
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    AudioBuffer audio = ReadWav(file);
    if (audio.sample_rate != kSampleRateHz) {
      throw std::runtime_error("corpus: '" + file.string() + "' is " +
                               std::to_string(audio.sample_rate) +
                               " Hz; only 16000 Hz is supported");
    }
    if (!audio.samples.empty()) sources_.push_back(std::move(audio.samples));
  }
  if (sources_.empty()) {
    throw std::runtime_error("corpus: no usable WAV files in '" + dir.string() + "'");
  }
}

std::vector<double> CorpusGenerator::SourceSpeech(std::uint64_t seed,
                                                  std::size_t length) const {
  if (sources_.empty()) return SpeechShapedNoise(length, seed);
  Rng rng(seed);
  const auto& source = sources_[rng.Below(sources_.size())];
  std::vector<double> out(length);
  std::size_t pos = rng.Below(source.size());
  for (double& v : out) {
    v = source[pos];
    pos = (pos + 1) % source.size();
  }
  return out;
}

SyntheticSample CorpusGenerator::Generate(std::size_t index) const {
  const std::size_t length =
      static_cast<std::size_t>(std::round(options_.duration_s * kSampleRateHz));
  const std::uint64_t base = DeriveSeed(options_.seed, index);
  // A draw whose near and far activity never overlap has no defined SER;
  // such draws are retried with the next sub-seed.
  for (std::uint64_t attempt = 0; attempt < 64; ++attempt) {
    const std::uint64_t sample_seed = DeriveSeed(base, attempt);
    Rng rng(sample_seed);
    MixtureSpec spec;
    if (options_.scenario) {
      spec.scenario = *options_.scenario;
    } else {
      const double u = rng.Uniform();
      spec.scenario = u < 0.5    ? Scenario::kDoubleTalk
                      : u < 0.75 ? Scenario::kSingleTalkFar
                                 : Scenario::kSingleTalkNear;
    }
    spec.ser_db = -10.0 + static_cast<double>(rng.Below(21));
    if (rng.Uniform() < 0.5) {
      spec.near_noise_snr_db = 10.0 + static_cast<double>(rng.Below(31));
    }
    if (rng.Uniform() < 0.3) {
      spec.far_noise_snr_db = 10.0 + static_cast<double>(rng.Below(31));
    }
    spec.rir_length_ms = 64.0 + static_cast<double>(rng.Below(193));
    spec.rir_decay_ms = 10.0 + static_cast<double>(rng.Below(51));
    const bool clip = rng.Uniform() < 0.3;
    const double clip_fraction = rng.Uniform(0.3, 0.8);
    const std::uint64_t rir_seed = rng.NextU64();
    const std::uint64_t near_seed = rng.NextU64();
    const std::uint64_t far_seed = rng.NextU64();
    const std::uint64_t mix_seed = rng.NextU64();

    spec.rir = GenRir(spec.rir_length_ms, spec.rir_decay_ms, rir_seed);
    const std::vector<double> near = SourceSpeech(near_seed, length);
    const std::vector<double> far = SourceSpeech(far_seed, length);
    if (!options_.noise) {
      spec.near_noise_snr_db.reset();
      spec.far_noise_snr_db.reset();
    }
    if (clip && options_.nonlinearity) {
      const double peak = Peak(far);
      if (peak > 0.0) spec.nonlinearity = Nonlinearity::HardClip(clip_fraction * peak);
    }
    try {
      return Mix(near, far, spec, mix_seed);
    } catch (const std::invalid_argument&) {
      if (spec.scenario != Scenario::kDoubleTalk) throw;
    }
  }
  throw std::runtime_error("corpus: could not draw a valid double-talk sample at index " +
                           std::to_string(index));
}

std::vector<ManifestRow> GenCorpus(const CorpusOptions& options,
                                   const std::filesystem::path& out_dir) {
  const CorpusGenerator generator(options);
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw std::runtime_error("corpus: cannot create '" + out_dir.string() +
                             "': " + ec.message());
  }
  std::vector<ManifestRow> rows;
  if (options.num_samples > 0) {
    for (const char* sub : {"farend_speech", "echo_signal", "nearend_mic_signal",
                            "nearend_speech"}) {
      std::filesystem::create_directories(out_dir / sub);
    }
  }
  for (std::size_t i = 0; i < options.num_samples; ++i) {
    const SyntheticSample sample = generator.Generate(i);
    ManifestRow row;
    row.index = i;
    row.scenario = sample.spec.scenario;
    row.ser_db = sample.spec.ser_db;
    row.near_noise_snr_db = sample.spec.near_noise_snr_db;
    row.far_noise_snr_db = sample.spec.far_noise_snr_db;
    row.nonlinearity = sample.spec.nonlinearity;
    row.rir_length_ms = sample.spec.rir_length_ms;
    row.rir_decay_ms = sample.spec.rir_decay_ms;
    const std::string id = std::to_string(i);
    row.farend = "farend_speech/farend_speech_fileid_" + id + ".wav";
    row.echo = "echo_signal/echo_fileid_" + id + ".wav";
    row.mic = "nearend_mic_signal/nearend_mic_fileid_" + id + ".wav";
    row.nearend = "nearend_speech/nearend_speech_fileid_" + id + ".wav";
    WriteWav(out_dir / row.farend, sample.far_end);
    WriteWav(out_dir / row.echo, sample.echo);
    WriteWav(out_dir / row.mic, sample.mic);
    WriteWav(out_dir / row.nearend, sample.near_end);
    rows.push_back(std::move(row));
  }
  const std::filesystem::path manifest = out_dir / kManifestName;
  std::ofstream out(manifest);
  if (!out) throw std::runtime_error("corpus: cannot write '" + manifest.string() + "'");
  WriteManifest(out, rows);
  if (!out) throw std::runtime_error("corpus: write failed for '" + manifest.string() + "'");
  return rows;
}

void WriteManifest(std::ostream& out, const std::vector<ManifestRow>& rows) {
  out << "index,scenario,ser_db,near_noise_snr_db,far_noise_snr_db,"
         "nonlinearity,clip_threshold,rir_length_ms,rir_decay_ms,"
         "farend,echo,mic,nearend\n";
  const auto old_precision = out.precision(17);
  for (const ManifestRow& r : rows) {
    const bool clip = r.nonlinearity.kind == Nonlinearity::Kind::kHardClip;
    out << r.index << ',' << ToString(r.scenario) << ',' << r.ser_db << ','
        << FormatOptional(r.near_noise_snr_db) << ','
        << FormatOptional(r.far_noise_snr_db) << ','
        << (clip ? "hard_clip" : "none") << ',';
    if (clip) out << r.nonlinearity.threshold;
    out << ',' << r.rir_length_ms << ',' << r.rir_decay_ms << ',' << r.farend
        << ',' << r.echo << ',' << r.mic << ',' << r.nearend << '\n';
  }
  out.precision(old_precision);
}

std::vector<ManifestRow> ReadManifest(std::istream& in) {
  std::vector<ManifestRow> rows;
  std::string line;
  std::size_t line_no = 0;
  auto number = [&](const std::string& text) {
    try {
      std::size_t used = 0;
      const double v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
      return v;
    } catch (const std::exception&) {
      throw FormatError("manifest line " + std::to_string(line_no) +
                        ": bad number '" + text + "'");
    }
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1 || line.empty()) continue;
    const auto f = SplitCsv(line);
    if (f.size() != 13) {
      throw FormatError("manifest line " + std::to_string(line_no) +
                        ": expected 13 fields, found " + std::to_string(f.size()));
    }
    ManifestRow row;
    row.index = static_cast<std::size_t>(number(f[0]));
    try {
      row.scenario = ParseScenario(f[1]);
    } catch (const std::invalid_argument& e) {
      throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    row.ser_db = number(f[2]);
    if (!f[3].empty()) row.near_noise_snr_db = number(f[3]);
    if (!f[4].empty()) row.far_noise_snr_db = number(f[4]);
    if (f[5] == "hard_clip") {
      row.nonlinearity = Nonlinearity::HardClip(number(f[6]));
    } else if (f[5] != "none") {
      throw FormatError("manifest line " + std::to_string(line_no) +
                        ": unknown nonlinearity '" + f[5] + "'");
    }
    row.rir_length_ms = number(f[7]);
    row.rir_decay_ms = number(f[8]);
    row.farend = f[9];
    row.echo = f[10];
    row.mic = f[11];
    row.nearend = f[12];
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<ManifestRow> ReadManifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open manifest '" + path.string() + "'");
  return ReadManifest(in);
}

}  // namespace unetaec
