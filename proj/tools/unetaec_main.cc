// Command-line front end: corpus generation, training, hyperparameter search,
// echo cancellation of WAV files, corpus evaluation, latency benchmarks and
// weight inspection.
//
// Exit status: 0 on success, 1 on usage errors, 2 on runtime errors.

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#ifdef UNETAEC_CLI11_PACKAGE
#include <CLI/CLI.hpp>
#else
#include "CLI11.hpp"
#endif
#include "unetaec/config.h"
#include "unetaec/evaluate.h"
#include "unetaec/random.h"
#include "unetaec/stream.h"
#include "unetaec/synth.h"
#include "unetaec/topology.h"
#include "unetaec/train.h"
#include "unetaec/wav.h"
#include "unetaec/weights.h"

namespace {

using namespace unetaec;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Settings shared by all subcommands. Command-line values override the
// config file.
struct Globals {
  std::uint64_t seed = 0;
  std::string config_path;
  std::string precision;
  Config config;

  void Load(CLI::App& app) {
    if (!config_path.empty()) config = Config::Load(config_path);
    if (app.count("--seed") > 0) config.Set("seed", std::to_string(seed));
    if (!precision.empty()) config.Set("precision", precision);
    if (auto s = config.GetInt("seed")) seed = static_cast<std::uint64_t>(*s);
  }
};

struct TopologyFlags {
  int encoders = 4;
  int filters = 16;
  std::string residual = "conf1";
  int depth = 2;

  void Add(CLI::App* cmd) {
    cmd->add_option("--encoders", encoders, "Encoder levels (decoders = encoders - 1)")
        ->check(CLI::Range(2, 8));
    cmd->add_option("--filters", filters, "Filters at the first level (F0)")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--residual", residual, "Residual block configuration")
        ->check(CLI::IsMember({"conf1", "conf2"}));
    cmd->add_option("--depth", depth, "Stacked convolutions per residual block")
        ->check(CLI::PositiveNumber);
  }

  NetTopology Build() const {
    NetTopology t;
    t.num_encoders = encoders;
    t.num_decoders = encoders - 1;
    t.base_filters = filters;
    t.residual_config = residual == "conf2" ? ResidualConfig::kConf2 : ResidualConfig::kConf1;
    t.residual_depth = depth;
    t.Validate();
    return t;
  }
};

struct EngineFlags {
  std::string engine;
  std::string weights;
  std::optional<double> mu;

  void Add(CLI::App* cmd) {
    cmd->add_option("--engine", engine, "unet, pfblms or passthrough")
        ->check(CLI::IsMember({"unet", "pfblms", "passthrough"}));
    cmd->add_option("--weights", weights, "Weight file for the unet engine");
    cmd->add_option("--mu", mu, "PFB-LMS step size");
  }

  EngineConfig Build(Globals& globals) const {
    if (!engine.empty()) globals.config.Set("engine", engine);
    if (!weights.empty()) globals.config.Set("weights", weights);
    if (mu) globals.config.Set("mu", std::to_string(*mu));
    EngineConfig config;
    ApplyConfig(globals.config, &config);
    config.Validate();
    return config;
  }
};

void WarnUnused(const Config& config) {
  for (const auto& key : config.Unused()) {
    std::cerr << "warning: config key '" << key << "' is not used by this command\n";
  }
}

// Loads every corpus sample and cuts `per_sample` random frames from each.
std::vector<TrainingExample> LoadExamples(const std::string& manifest,
                                          std::size_t per_sample,
                                          std::uint64_t seed) {
  const auto rows = ReadManifest(std::filesystem::path(manifest));
  const std::filesystem::path dir = std::filesystem::path(manifest).parent_path();
  std::vector<TrainingExample> out;
  for (const auto& row : rows) {
    const AudioBuffer far = ReadWav(dir / row.farend);
    const AudioBuffer mic = ReadWav(dir / row.mic);
    const AudioBuffer near = ReadWav(dir / row.nearend);
    auto examples = SampleExamples(far.view(), mic.view(), near.view(), per_sample,
                                   DeriveSeed(seed, row.index));
    for (auto& e : examples) out.push_back(std::move(e));
  }
  if (out.empty()) throw std::runtime_error("corpus '" + manifest + "' has no samples");
  return out;
}

int RunGen(Globals& g, const CorpusOptions& base, const std::string& out_dir,
           const std::string& source, const std::string& scenario) {
  CorpusOptions options = base;
  options.seed = g.seed;
  if (!source.empty()) options.source_dir = source;
  if (!scenario.empty()) options.scenario = ParseScenario(scenario);
  WarnUnused(g.config);
  const auto rows = GenCorpus(options, out_dir);
  std::cout << "wrote " << rows.size() << " samples and "
            << (std::filesystem::path(out_dir) / kManifestName).string() << "\n";
  return kExitOk;
}

int RunTrain(Globals& g, const TopologyFlags& topo, const std::string& corpus,
             const std::string& out, std::size_t per_sample,
             const std::optional<int>& epochs, const std::optional<int>& batch,
             const std::string& optimizer, const std::optional<double>& lr) {
  if (epochs) g.config.Set("epochs", std::to_string(*epochs));
  if (batch) g.config.Set("batch", std::to_string(*batch));
  if (!optimizer.empty()) g.config.Set("optimizer", optimizer);
  if (lr) g.config.Set("learning_rate", std::to_string(*lr));
  OptimizerConfig opt;
  ApplyConfig(g.config, &opt);
  TrainOptions train;
  train.seed = g.seed;
  ApplyConfig(g.config, &train);
  (void)g.config.GetString("precision");
  WarnUnused(g.config);

  const NetTopology topology = topo.Build();
  const auto examples = LoadExamples(corpus, per_sample, g.seed);
  std::cout << "training " << Describe(topology) << " on " << examples.size()
            << " frames, " << ToString(opt.kind) << " lr " << opt.learning_rate << "\n";
  const auto result = Train<float>(examples, topology, opt, train);
  for (std::size_t e = 0; e < result.epoch_loss.size(); ++e) {
    std::cout << "epoch " << (e + 1) << " loss " << std::setprecision(6)
              << result.epoch_loss[e] << "\n";
  }
  std::cout << "final loss " << result.final_loss << "\n";
  NetWeights weights;
  weights.params = result.params;
  SaveWeights(weights, out);
  std::cout << "saved " << out << "\n";
  return kExitOk;
}

int RunSearch(Globals& g, const std::string& corpus, const std::string& out,
              int budget, int epochs, std::size_t per_sample, int crop_freq,
              int crop_time, double validation_fraction) {
  WarnUnused(g.config);
  auto examples = LoadExamples(corpus, per_sample, g.seed);
  if (crop_freq > 0 || crop_time > 0) {
    for (auto& e : examples) {
      e = CropExample(e, crop_freq > 0 ? crop_freq : kNumBins,
                      crop_time > 0 ? crop_time : kNumFrames);
    }
  }
  Rng rng(DeriveSeed(g.seed, 7));
  rng.Shuffle(examples.begin(), examples.end());
  auto split = static_cast<std::size_t>(validation_fraction * static_cast<double>(examples.size()));
  if (examples.size() > 1) split = std::clamp<std::size_t>(split, 1, examples.size() - 1);
  else split = 0;
  const std::vector<TrainingExample> validation(examples.begin(), examples.begin() + split);
  const std::vector<TrainingExample> train_set(examples.begin() + split, examples.end());

  SearchOptions options;
  options.budget = budget;
  options.epochs = epochs;
  options.seed = g.seed;
  const auto ranked = RandomSearch(SearchSpace{}, train_set, validation, options);
  if (out.empty()) {
    WriteSearchReport(std::cout, ranked);
  } else {
    std::ofstream file(out);
    if (!file) throw std::runtime_error("cannot write '" + out + "'");
    WriteSearchReport(file, ranked);
    std::cout << "wrote " << out << " (" << ranked.size() << " trials)\n";
  }
  return kExitOk;
}

int RunCancel(Globals& g, const EngineFlags& flags, const std::string& far_path,
              const std::string& mic_path, const std::string& out, bool latency) {
  const EngineConfig config = flags.Build(g);
  WarnUnused(g.config);
  const AudioBuffer far = ReadWav(far_path);
  const AudioBuffer mic = ReadWav(mic_path);
  auto engine = MakeEngine(config);
  const StreamResult result = StreamProcess(*engine, far, mic);
  if (result.trimmed) {
    std::cerr << "warning: far and mic lengths differ; trimmed to the shorter\n";
  }
  WriteWav(out, AudioBuffer(result.output));
  std::cout << "wrote " << out << " (" << result.output.size() << " samples, engine "
            << engine->name() << ")\n";
  if (latency) {
    BenchReport report;
    report.engine = engine->name();
    report.precision = config.precision;
    report.latency = result.latency;
    WriteBenchReport(std::cout, std::span<const BenchReport>(&report, 1));
  }
  return kExitOk;
}

int RunEval(Globals& g, const EngineFlags& flags, const std::string& corpus,
            const std::string& table) {
  const EngineConfig config = flags.Build(g);
  WarnUnused(g.config);
  auto engine = MakeEngine(config);
  const MetricsReport report = EvaluateCorpus(*engine, corpus);
  WriteMetricsSummary(std::cout, report);
  if (!table.empty()) {
    std::ofstream file(table);
    if (!file) throw std::runtime_error("cannot write '" + table + "'");
    WriteMetricsTable(file, report);
  }
  return report.failures == report.samples.size() && !report.samples.empty()
             ? kExitRuntime
             : kExitOk;
}

int RunBench(Globals& g, const EngineFlags& flags, const TopologyFlags& topo,
             double duration, int repetitions, bool compare, bool random_weights) {
  if (random_weights) g.config.Set("engine", "unet");
  EngineFlags effective = flags;
  if (random_weights) effective.weights = "(random)";
  const EngineConfig config = effective.Build(g);
  WarnUnused(g.config);

  std::vector<BenchReport> reports;
  if (config.engine == EngineKind::kUnet) {
    const NetWeights weights = random_weights ? RandomWeights(topo.Build(), g.seed)
                                              : LoadWeights(config.weights);
    std::vector<Precision> precisions{config.precision};
    if (compare) precisions = {Precision::kFp32, Precision::kFp16};
    for (Precision p : precisions) {
      auto engine = MakeUnetEngine(weights, p);
      reports.push_back(Bench(*engine, p, duration, repetitions, g.seed));
    }
  } else {
    auto engine = MakeEngine(config);
    reports.push_back(Bench(*engine, config.precision, duration, repetitions, g.seed));
  }

  WriteBenchReport(std::cout, reports);
  for (const auto& r : reports) {
    std::cout << r.engine << ": mean total " << std::fixed << std::setprecision(3)
              << r.latency.total.mean << " ms per stride vs " << kStrideBudgetMs
              << " ms budget: " << (r.within_budget ? "PASS" : "FAIL") << "\n";
  }
  if (reports.size() == 2) {
    const double ratio = reports[1].latency.model_inference.mean /
                         reports[0].latency.model_inference.mean;
    std::cout << "fp16/fp32 inference time " << std::setprecision(3) << ratio
              << " (reduction " << (1.0 - ratio) * 100.0 << "%; reference reduction "
              << kReferenceFp16Reduction * 100.0 << "%)\n";
  }
  return kExitOk;
}

int RunInspect(const std::string& path) {
  const NetWeights weights = LoadWeights(path);
  const NetTopology& t = weights.topology();
  std::cout << "file: " << path << "\n"
            << "precision: " << ToString(weights.precision) << "\n"
            << "num_encoders: " << t.num_encoders << "\n"
            << "num_decoders: " << t.num_decoders << "\n"
            << "base_filters: " << t.base_filters << "\n"
            << "residual_config: " << ToString(t.residual_config) << "\n"
            << "residual_depth: " << t.residual_depth << "\n"
            << "kernel_size: " << t.kernel_size << "\n"
            << "pool_size: " << t.pool_size << "\n"
            << "in_channels: " << t.in_channels << "\n"
            << "layers: " << weights.params.layers.size() << "\n"
            << "param_count: " << ParamCount(t) << "\n"
            << "storage_bytes: " << weights.storage_bytes() << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Residual U-Net acoustic echo canceller"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--config", g.config_path, "key = value settings file");
  app.add_option("--precision", g.precision, "fp32 or fp16")
      ->check(CLI::IsMember({"fp32", "fp16"}));

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic echo corpus");
  CorpusOptions corpus_options;
  std::string gen_out, gen_source, gen_scenario;
  gen->add_option("--out", gen_out, "Output directory")->required();
  gen->add_option("--num", corpus_options.num_samples, "Number of samples")->required();
  gen->add_option("--duration", corpus_options.duration_s, "Seconds per sample")
      ->check(CLI::PositiveNumber);
  gen->add_option("--source", gen_source, "Directory of 16 kHz speech WAVs");
  gen->add_option("--scenario", gen_scenario, "Force one scenario")
      ->check(CLI::IsMember({"single_talk_far", "single_talk_near", "double_talk"}));
  bool linear = false;
  gen->add_flag("--linear", linear, "No clipping and no added noise");

  // train
  auto* train = app.add_subcommand("train", "Train a network on a corpus");
  TopologyFlags train_topo;
  train_topo.Add(train);
  std::string train_corpus, train_out = "weights.bin", train_optimizer;
  std::size_t train_frames = 4;
  std::optional<int> train_epochs, train_batch;
  std::optional<double> train_lr;
  train->add_option("--corpus", train_corpus, "Corpus manifest (meta.csv)")->required();
  train->add_option("--out", train_out, "Output weight file");
  train->add_option("--frames-per-sample", train_frames, "Random frames per sample");
  train->add_option("--epochs", train_epochs, "Training epochs");
  train->add_option("--batch", train_batch, "Batch size");
  train->add_option("--optimizer", train_optimizer, "sgd, adam or nadam")
      ->check(CLI::IsMember({"sgd", "adam", "nadam"}));
  train->add_option("--lr", train_lr, "Learning rate");

  // search
  auto* search = app.add_subcommand("search", "Random search over the hyperparameter grid");
  std::string search_corpus, search_out;
  int search_budget = 8, search_epochs = 2, crop_freq = 0, crop_time = 0;
  std::size_t search_frames = 2;
  double validation_fraction = 0.25;
  search->add_option("--corpus", search_corpus, "Corpus manifest (meta.csv)")->required();
  search->add_option("--budget", search_budget, "Grid points to train")->check(CLI::Range(1, 72));
  search->add_option("--epochs", search_epochs, "Epochs per trial");
  search->add_option("--frames-per-sample", search_frames, "Random frames per sample");
  search->add_option("--crop-freq", crop_freq, "Keep only the lowest bins (toy runs)");
  search->add_option("--crop-time", crop_time, "Keep only the newest frames (toy runs)");
  search->add_option("--validation", validation_fraction, "Validation fraction")
      ->check(CLI::Range(0.0, 0.9));
  search->add_option("--out", search_out, "Report file (stdout if omitted)");

  // cancel
  auto* cancel = app.add_subcommand("cancel", "Remove echo from a microphone WAV");
  EngineFlags cancel_engine;
  cancel_engine.Add(cancel);
  std::string far_path, mic_path, cancel_out;
  bool cancel_latency = false;
  cancel->add_option("--far", far_path, "Far-end WAV")->required();
  cancel->add_option("--mic", mic_path, "Microphone WAV")->required();
  cancel->add_option("--out", cancel_out, "Output WAV")->required();
  cancel->add_flag("--latency", cancel_latency, "Print the stage timing table");

  // eval
  auto* eval = app.add_subcommand("eval", "Score an engine on a corpus");
  EngineFlags eval_engine;
  eval_engine.Add(eval);
  std::string eval_corpus, eval_table;
  eval->add_option("--corpus", eval_corpus, "Corpus manifest (meta.csv)")->required();
  eval->add_option("--table", eval_table, "Per-sample CSV output");

  // bench
  auto* bench = app.add_subcommand("bench", "Measure per-stride latency");
  EngineFlags bench_engine;
  bench_engine.Add(bench);
  TopologyFlags bench_topo;
  bench_topo.Add(bench);
  double bench_duration = 5.0;
  int bench_reps = 1;
  bool bench_compare = false, bench_random = false;
  bench->add_option("--duration", bench_duration, "Seconds of audio per repetition")
      ->check(CLI::PositiveNumber);
  bench->add_option("--repetitions", bench_reps, "Repetitions")->check(CLI::PositiveNumber);
  bench->add_flag("--compare", bench_compare, "Run fp32 and fp16 and report the ratio");
  bench->add_flag("--random-weights", bench_random,
                  "Use He-initialized weights for the given topology");

  // inspect-weights
  auto* inspect = app.add_subcommand("inspect-weights", "Print topology and parameter count");
  std::string inspect_path;
  inspect->add_option("file", inspect_path, "Weight file")->required();

  if (argc <= 1) {
    std::cerr << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    g.Load(app);
    if (*gen) {
      if (linear) {
        corpus_options.noise = false;
        corpus_options.nonlinearity = false;
      }
      return RunGen(g, corpus_options, gen_out, gen_source, gen_scenario);
    }
    if (*train) {
      return RunTrain(g, train_topo, train_corpus, train_out, train_frames,
                      train_epochs, train_batch, train_optimizer, train_lr);
    }
    if (*search) {
      return RunSearch(g, search_corpus, search_out, search_budget, search_epochs,
                       search_frames, crop_freq, crop_time, validation_fraction);
    }
    if (*cancel) {
      return RunCancel(g, cancel_engine, far_path, mic_path, cancel_out, cancel_latency);
    }
    if (*eval) return RunEval(g, eval_engine, eval_corpus, eval_table);
    if (*bench) {
      return RunBench(g, bench_engine, bench_topo, bench_duration, bench_reps,
                      bench_compare, bench_random);
    }
    if (*inspect) return RunInspect(inspect_path);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
