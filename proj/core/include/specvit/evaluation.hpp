#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "specvit/imaging.hpp"
#include "specvit/pipeline.hpp"
#include "specvit/spectral.hpp"
#include "specvit/vit.hpp"

namespace specvit {

/// Percent of positions where pred == label.
double accuracy(std::span<const int> preds, std::span<const int> labels);

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

/// Confusion counts, rows = true label, columns = prediction.
std::vector<std::vector<std::size_t>> confusion_matrix(std::span<const int> preds, std::span<const int> labels,
                                                       std::size_t num_classes);
std::vector<ClassMetrics> per_class_metrics(const std::vector<std::vector<std::size_t>>& confusion);

/// Support-weighted mean of per-class F1 (weights n_d / N).
double weighted_f1(std::span<const int> preds, std::span<const int> labels);

struct ConfidenceInterval {
  double low = 0.0;
  double high = 0.0;
  double width = 0.0;
};

/// Percentile bootstrap of accuracy (in percent).
ConfidenceInterval bootstrap_ci(std::span<const int> preds, std::span<const int> labels, std::size_t resamples,
                                double level, std::uint64_t seed);

struct EvalOptions {
  std::size_t resamples = 1000;
  double level = 0.95;
  std::uint64_t seed = 0;
};

struct EvalReport {
  double accuracy_pct = 0.0;
  double weighted_f1 = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double ci_width_pct = 0.0;
  std::vector<ClassMetrics> per_class;
  std::vector<std::vector<std::size_t>> confusion;
  std::size_t n_test = 0;
};

EvalReport make_report(std::span<const int> preds, std::span<const int> labels, std::size_t num_classes,
                       const EvalOptions& options);

/// Runs the model over [0,1] images standardised with `stats`.
std::vector<int> predict(const VitModel& model, const ChannelStats& stats, std::span<const SpectroImage> images);

EvalReport evaluate(const VitModel& model, const ChannelStats& stats, const LabeledImages& test,
                    const EvalOptions& options);

/// One cell of the factorial design.
struct ExperimentConfig {
  Method method = Method::Stft;
  std::size_t resolution = 16;
  std::size_t seg_len = 100;
  double overlap = 0.0;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// 2 methods x 3 resolutions x 2 segment lengths x 2 overlaps, ordered by
/// method (STFT first), resolution, seg_len, overlap.
std::vector<ExperimentConfig> enumerate_configs();

/// Sweep report: one row per configuration.
struct SweepRow {
  ExperimentConfig config;
  double train_acc_pct = 0.0;
  double val_acc_pct = 0.0;
  EvalReport test;
};

void write_sweep_header(std::ostream& out);
void write_sweep_row(std::ostream& out, const SweepRow& row);
void write_confusion_csv(std::ostream& out, const EvalReport& report);
void write_per_class_csv(std::ostream& out, const EvalReport& report);

struct CrossConfigCell {
  std::size_t seg_len = 0;
  double overlap = 0.0;
  double accuracy_pct = 0.0;
  std::size_t n = 0;
  bool in_distribution = false;
};

struct CrossConfigResult {
  std::vector<CrossConfigCell> cells;  // seg_len major, overlap minor
  double max_pairwise_gap = 0.0;       // max |acc(c1) - acc(c2)| over all cells
  std::vector<double> overlap_spread;  // per seg_len: max - min over overlaps
  std::vector<std::size_t> seg_lens;
  std::vector<double> overlaps;
};

/// A trained model together with everything needed to featurise new data
/// exactly as during training.
struct TrainedPipeline {
  VitModel model;
  NormalizationSidecar norm;
  FeatureSettings features;               // training seg_len / overlap / transform
  std::vector<std::size_t> region_end;    // per device; packets before this were used in training
};

/// Evaluates on held-out regions [ood_begin[d], trace end). Spectrograms use
/// the trained transform and percentile bounds with each cell's seg_len and
/// overlap. Throws ValidationError if a held-out region overlaps the
/// training region.
CrossConfigResult cross_config_eval(const TrainedPipeline& trained, std::span<const PacketTrace> traces,
                                    std::span<const std::size_t> ood_begin, std::span<const std::size_t> seg_lens,
                                    std::span<const double> overlaps);

/// Wide cross-config report: one row, one accuracy column per cell plus the
/// name of the in-distribution cell.
void write_crosseval_csv(std::ostream& out, const TrainedPipeline& trained, const CrossConfigResult& result);
/// Long form: seg_len,overlap,accuracy,n,in_distribution
void write_crosseval_cells_csv(std::ostream& out, const CrossConfigResult& result);

}  // namespace specvit
