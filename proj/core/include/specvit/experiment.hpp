#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>

#include "specvit/config.hpp"
#include "specvit/evaluation.hpp"
#include "specvit/pipeline.hpp"
#include "specvit/training.hpp"

namespace specvit {

/// Fully resolved settings for one train/evaluate run.
struct RunSettings {
  FeatureSettings features;
  VitConfig vit;
  TrainConfig train;
  SplitSpec split;
  EvalOptions eval;
  std::uint64_t seed = 0;
  std::uint64_t model_seed = 0;
};

/// Validates every field and derives module seeds from `seed` by name.
RunSettings resolve_run_settings(const KeyValueConfig& cfg, std::size_t num_classes);

struct ExperimentOutcome {
  PreparedDataset data;
  TrainedPipeline trained;
  TrainHistory history;
  double train_acc_pct = 0.0;  // best epoch, clean (un-augmented) pass
  double val_acc_pct = 0.0;
  EvalReport test;
};

ExperimentOutcome run_experiment(std::span<const PacketTrace> traces, const RunSettings& settings,
                                 const SampleObserver& observer = {});

/// Run directory files:
///   config.txt, history.csv, best.ckpt, split.csv, norm.txt, traces.csv,
///   report.csv, confusion.csv, per_class.csv
void write_run_directory(const std::filesystem::path& dir, const KeyValueConfig& resolved,
                         std::span<const PacketTrace> traces, const ExperimentOutcome& outcome);

/// Reloads a run directory written by write_run_directory.
struct LoadedRun {
  KeyValueConfig config;
  RunSettings settings;
  std::vector<PacketTrace> traces;
  TrainedPipeline trained;
  DatasetSplit split;
};

LoadedRun load_run_directory(const std::filesystem::path& dir);

/// Re-featurises the run's traces with the stored bounds and channel stats and
/// scores the stored test split.
EvalReport reevaluate(const LoadedRun& run);

}  // namespace specvit
