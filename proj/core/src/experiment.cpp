#include "specvit/experiment.hpp"

#include <fstream>

#include "specvit/checkpoint.hpp"
#include "specvit/errors.hpp"
#include "specvit/rng.hpp"

namespace specvit {
namespace {

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p);
  if (!out) throw ValidationError("cannot write " + p.string());
  return out;
}

void write_report_csv(const std::filesystem::path& path, const ExperimentConfig& cfg, double train_acc,
                      double val_acc, const EvalReport& report) {
  auto out = open_out(path);
  write_sweep_header(out);
  write_sweep_row(out, SweepRow{cfg, train_acc, val_acc, report});
}

ExperimentConfig experiment_config_of(const FeatureSettings& f) {
  return {f.transform.method, f.transform.resolution, f.seg_len, f.overlap};
}

}  // namespace

RunSettings resolve_run_settings(const KeyValueConfig& cfg, std::size_t num_classes) {
  RunSettings s;
  s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  s.features = feature_settings_from_config(cfg);
  s.vit = vit_config_from_config(cfg, s.features.image_size, num_classes);
  s.train = train_config_from_config(cfg, s.seed);
  s.split = split_spec_from_config(cfg, s.seed);
  s.eval.resamples = static_cast<std::size_t>(cfg.get_int("eval.resamples", 1000));
  s.eval.level = cfg.get_double("eval.level", 0.95);
  s.eval.seed = derive_seed(s.seed, "eval.bootstrap");
  s.model_seed = derive_seed(s.seed, "vit.init");
  if (s.eval.resamples < 100) throw ValidationError("eval.resamples must be >= 100");
  if (!(s.eval.level > 0.0 && s.eval.level < 1.0)) throw ValidationError("eval.level must lie in (0, 1)");
  return s;
}

ExperimentOutcome run_experiment(std::span<const PacketTrace> traces, const RunSettings& settings,
                                 const SampleObserver& observer) {
  ExperimentOutcome out;
  out.data = prepare_dataset(traces, settings.features, settings.split);
  const auto train_set = gather(out.data, out.data.split.train);
  const auto val_set = gather(out.data, out.data.split.val);
  const auto test_set = gather(out.data, out.data.split.test);

  auto result = train(init_model(settings.vit, settings.model_seed), train_set, val_set, out.data.norm.channels,
                      settings.train, observer);
  out.history = std::move(result.history);
  out.trained = TrainedPipeline{std::move(result.model), out.data.norm, settings.features, out.data.region_end};

  const auto& model = out.trained.model;
  const auto& stats = out.trained.norm.channels;
  out.train_acc_pct = accuracy(predict(model, stats, train_set.images), train_set.labels);
  out.val_acc_pct = accuracy(predict(model, stats, val_set.images), val_set.labels);
  if (observer)
    for (std::size_t i = 0; i < test_set.images.size(); ++i) observer(SplitKind::Test, i, false);
  out.test = evaluate(model, stats, test_set, settings.eval);
  return out;
}

void write_run_directory(const std::filesystem::path& dir, const KeyValueConfig& resolved,
                         std::span<const PacketTrace> traces, const ExperimentOutcome& outcome) {
  std::filesystem::create_directories(dir);
  {
    auto out = open_out(dir / "config.txt");
    resolved.write(out);
  }
  {
    auto out = open_out(dir / "history.csv");
    write_history_csv(out, outcome.history);
  }
  {
    auto out = open_out(dir / "split.csv");
    write_split_csv(out, outcome.data.spectrograms.labels, outcome.data.split);
  }
  save_checkpoint(dir / "best.ckpt", outcome.trained.model);
  save_sidecar(dir / "norm.txt", outcome.trained.norm);
  save_traces(dir / "traces.csv", traces);
  write_report_csv(dir / "report.csv", experiment_config_of(outcome.trained.features), outcome.train_acc_pct,
                   outcome.val_acc_pct, outcome.test);
  {
    auto out = open_out(dir / "confusion.csv");
    write_confusion_csv(out, outcome.test);
  }
  {
    auto out = open_out(dir / "per_class.csv");
    write_per_class_csv(out, outcome.test);
  }
}

LoadedRun load_run_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw ValidationError("not a run directory: " + dir.string());
  LoadedRun run;
  run.config = KeyValueConfig::load(dir / "config.txt");
  run.traces = load_traces(dir / "traces.csv");
  run.settings = resolve_run_settings(run.config, run.traces.size());
  run.trained.model = load_checkpoint(dir / "best.ckpt");
  if (!(run.trained.model.config == run.settings.vit))
    throw ValidationError(dir.string() + ": checkpoint shape disagrees with config.txt");
  run.trained.norm = load_sidecar(dir / "norm.txt");
  run.trained.features = run.settings.features;
  for (const auto& t : run.traces)
    run.trained.region_end.push_back(in_distribution_end(t, run.settings.features.ood_fraction));

  std::size_t samples = 0;
  for (std::size_t d = 0; d < run.traces.size(); ++d)
    samples += segment_count(run.trained.region_end[d], run.settings.features.segmentation());
  std::ifstream split_in(dir / "split.csv");
  if (!split_in) throw ValidationError("missing split.csv in " + dir.string());
  run.split = read_split_csv(split_in, samples, (dir / "split.csv").string());
  return run;
}

EvalReport reevaluate(const LoadedRun& run) {
  const auto& f = run.settings.features;
  std::vector<std::size_t> begin(run.traces.size(), 0);
  const auto set = build_spectrograms(run.traces, f.segmentation(), f.transform, begin, run.trained.region_end);
  LabeledImages test;
  SpectrogramSet subset;
  for (auto i : run.split.test) {
    subset.specs.push_back(set.specs[i]);
    subset.labels.push_back(set.labels[i]);
    subset.starts.push_back(set.starts[i]);
  }
  test.images = render_all(subset, run.trained.norm, f);
  test.labels = subset.labels;
  return evaluate(run.trained.model, run.trained.norm.channels, test, run.settings.eval);
}

}  // namespace specvit
