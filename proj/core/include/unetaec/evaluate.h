#ifndef UNETAEC_EVALUATE_H_
#define UNETAEC_EVALUATE_H_

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "unetaec/audio_buffer.h"
#include "unetaec/stream.h"
#include "unetaec/synth.h"

namespace unetaec {

struct CorpusItem {
  ManifestRow row;
  AudioBuffer far_end;
  AudioBuffer echo;
  AudioBuffer mic;
  AudioBuffer near_end;
};

// Produces the near-end estimate for one corpus item. The result may be
// shorter than the microphone signal (streaming engines drop the trailing
// partial stride); metrics use the common prefix.
using CorpusProcessor = std::function<std::vector<double>(const CorpusItem&)>;

struct SampleMetrics {
  std::size_t index = 0;
  Scenario scenario = Scenario::kDoubleTalk;
  bool ok = false;
  std::string error;
  // Over frames where the near end is inactive; unset when there are none.
  std::optional<double> erle_db;
  double mic_energy = 0.0;       // selected frames
  double residual_energy = 0.0;  // selected frames
  // Log-spectral distance to the near-end speech; set when it is present.
  std::optional<double> distortion_db;
};

struct ScenarioSummary {
  Scenario scenario = Scenario::kDoubleTalk;
  std::size_t count = 0;
  std::size_t erle_count = 0;
  // 10*log10 of the pooled microphone over residual energy; +inf when the
  // pooled residual is zero, unset when no sample has ERLE frames.
  std::optional<double> erle_db;
  std::size_t distortion_count = 0;
  std::optional<double> mean_distortion_db;
};

struct MetricsReport {
  std::string method;
  std::vector<SampleMetrics> samples;
  std::vector<ScenarioSummary> scenarios;  // only scenarios that occur
  std::size_t failures = 0;

  const ScenarioSummary* Find(Scenario scenario) const;
};

// Reads the manifest and its WAV files and scores every sample. Failing
// samples (missing files, engine errors) are recorded and skipped by the
// aggregates. Samples are processed in manifest order.
MetricsReport EvaluateCorpus(const std::string& method,
                             const CorpusProcessor& processor,
                             const std::filesystem::path& manifest);
MetricsReport EvaluateCorpus(Engine& engine,
                             const std::filesystem::path& manifest);

// Per-sample comma-separated table.
void WriteMetricsTable(std::ostream& out, const MetricsReport& report);
// Human-readable per-scenario block.
void WriteMetricsSummary(std::ostream& out, const MetricsReport& report);

}  // namespace unetaec

#endif  // UNETAEC_EVALUATE_H_
