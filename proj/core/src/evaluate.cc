#include "unetaec/evaluate.h"

#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "unetaec/metrics.h"
#include "unetaec/wav.h"

namespace unetaec {
namespace {

std::string FormatDb(const std::optional<double>& v) {
  if (!v) return "";
  if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
  std::ostringstream s;
  s << std::fixed << std::setprecision(3) << *v;
  return s.str();
}

SampleMetrics Score(const CorpusItem& item, const std::vector<double>& estimate) {
  SampleMetrics m;
  m.index = item.row.index;
  m.scenario = item.row.scenario;
  const std::size_t n = std::min(estimate.size(), item.mic.size());
  const std::span<const double> mic = item.mic.view().first(n);
  const std::span<const double> near = item.near_end.view().first(n);
  const std::span<const double> est(estimate.data(), n);

  const ActivityMask inactive = ComputeActivityMask(near).Inverted();
  if (inactive.count() > 0) {
    for (std::size_t f = 0; f < inactive.size(); ++f) {
      if (!inactive.active[f]) continue;
      for (std::size_t i = f * kStrideSamples; i < (f + 1) * kStrideSamples; ++i) {
        m.mic_energy += mic[i] * mic[i];
        m.residual_energy += est[i] * est[i];
      }
    }
    m.erle_db = Erle(mic, est, inactive);
  }
  if (item.row.scenario != Scenario::kSingleTalkFar && n > 0) {
    m.distortion_db = SpectralDistortion(est, near);
  }
  m.ok = true;
  return m;
}

CorpusItem LoadItem(const ManifestRow& row, const std::filesystem::path& dir) {
  CorpusItem item;
  item.row = row;
  item.far_end = ReadWav(dir / row.farend);
  item.echo = ReadWav(dir / row.echo);
  item.mic = ReadWav(dir / row.mic);
  item.near_end = ReadWav(dir / row.nearend);
  if (item.mic.size() != item.near_end.size() ||
      item.mic.size() != item.far_end.size()) {
    throw FormatError("sample " + std::to_string(row.index) +
                      ": far/mic/near lengths differ");
  }
  return item;
}

}  // namespace

const ScenarioSummary* MetricsReport::Find(Scenario scenario) const {
  for (const auto& s : scenarios) {
    if (s.scenario == scenario) return &s;
  }
  return nullptr;
}

MetricsReport EvaluateCorpus(const std::string& method,
                             const CorpusProcessor& processor,
                             const std::filesystem::path& manifest) {
  const std::vector<ManifestRow> rows = ReadManifest(manifest);
  const std::filesystem::path dir = manifest.parent_path();
  MetricsReport report;
  report.method = method;
  for (const ManifestRow& row : rows) {
    try {
      const CorpusItem item = LoadItem(row, dir);
      report.samples.push_back(Score(item, processor(item)));
    } catch (const std::exception& e) {
      SampleMetrics failed;
      failed.index = row.index;
      failed.scenario = row.scenario;
      failed.error = e.what();
      report.samples.push_back(std::move(failed));
      ++report.failures;
    }
  }

  for (Scenario scenario : {Scenario::kSingleTalkFar, Scenario::kSingleTalkNear,
                            Scenario::kDoubleTalk}) {
    ScenarioSummary summary;
    summary.scenario = scenario;
    double mic_energy = 0.0;
    double residual_energy = 0.0;
    double distortion_sum = 0.0;
    for (const SampleMetrics& m : report.samples) {
      if (!m.ok || m.scenario != scenario) continue;
      ++summary.count;
      if (m.erle_db) {
        ++summary.erle_count;
        mic_energy += m.mic_energy;
        residual_energy += m.residual_energy;
      }
      if (m.distortion_db) {
        ++summary.distortion_count;
        distortion_sum += *m.distortion_db;
      }
    }
    if (summary.count == 0) continue;
    if (summary.erle_count > 0) {
      summary.erle_db = residual_energy == 0.0
                            ? std::numeric_limits<double>::infinity()
                            : 10.0 * std::log10(mic_energy / residual_energy);
    }
    if (summary.distortion_count > 0) {
      summary.mean_distortion_db =
          distortion_sum / static_cast<double>(summary.distortion_count);
    }
    report.scenarios.push_back(summary);
  }
  return report;
}

MetricsReport EvaluateCorpus(Engine& engine,
                             const std::filesystem::path& manifest) {
  return EvaluateCorpus(
      engine.name(),
      [&engine](const CorpusItem& item) {
        return StreamProcess(engine, item.far_end, item.mic).output;
      },
      manifest);
}

void WriteMetricsTable(std::ostream& out, const MetricsReport& report) {
  out << "method,index,scenario,status,erle_db,distortion_db,error\n";
  for (const SampleMetrics& m : report.samples) {
    out << report.method << ',' << m.index << ',' << ToString(m.scenario) << ','
        << (m.ok ? "ok" : "failed") << ',' << FormatDb(m.erle_db) << ','
        << FormatDb(m.distortion_db) << ',';
    // Keep the error message on one CSV field.
    for (char c : m.error) out << (c == ',' || c == '\n' ? ' ' : c);
    out << '\n';
  }
}

void WriteMetricsSummary(std::ostream& out, const MetricsReport& report) {
  out << "method: " << report.method << "\n";
  out << "quality proxy: log-spectral distance in dB (lower is better; "
         "not PESQ)\n";
  out << std::left << std::setw(18) << "scenario" << std::setw(12) << "ERLE dB"
      << std::setw(16) << "distortion dB" << "samples\n";
  for (const ScenarioSummary& s : report.scenarios) {
    out << std::setw(18) << ToString(s.scenario) << std::setw(12)
        << (s.erle_db ? FormatDb(s.erle_db) : "n/a") << std::setw(16)
        << (s.mean_distortion_db ? FormatDb(s.mean_distortion_db) : "n/a")
        << s.count << '\n';
  }
  out << std::right;
  if (report.failures > 0) {
    out << "failed samples: " << report.failures << '\n';
  }
}

}  // namespace unetaec
