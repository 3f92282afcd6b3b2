#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "specvit/imaging.hpp"
#include "specvit/vit.hpp"

namespace specvit {

struct SplitSpec {
  double train_frac = 5.0 / 7.0;
  double val_frac = 1.0 / 7.0;
  double test_frac = 1.0 / 7.0;
  std::uint64_t seed = 0;

  void validate() const;
};

enum class SplitKind { Train, Val, Test };
std::string_view to_string(SplitKind k);

/// Indices into the sample list, each ascending.
struct DatasetSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Per-device shuffle (sub-seed = seed XOR device_id). Validation and test
/// counts are round(frac * n); the remainder goes to training.
DatasetSplit split_dataset(std::span<const int> device_of_sample, const SplitSpec& spec);

/// device_id,image_index,split
void write_split_csv(std::ostream& out, std::span<const int> device_of_sample, const DatasetSplit& split);
DatasetSplit read_split_csv(std::istream& in, std::size_t sample_count, const std::string& source = "<split>");

/// One-cycle learning rate: linear warm-up from peak/div_factor to peak over
/// the first warmup_frac of the steps, then cosine annealing to
/// peak/final_div_factor at the last step.
struct OneCycleSchedule {
  double peak_lr = 1e-4;
  double warmup_frac = 0.3;
  double div_factor = 25.0;
  double final_div_factor = 1e4;

  double at(std::size_t step, std::size_t total_steps) const;
};

double lr_at(std::size_t step, std::size_t total_steps, double peak_lr);

struct TrainConfig {
  std::size_t batch_size = 16;
  std::size_t max_epochs = 50;
  std::size_t patience = 15;
  double peak_lr = 1e-4;
  double warmup_frac = 0.3;
  double weight_decay = 0.05;
  double clip_norm = 1.0;
  double label_smoothing = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool augment = true;
  AugmentConfig augmentation;
  std::uint64_t seed = 0;

  void validate() const;
  OneCycleSchedule schedule() const { return {peak_lr, warmup_frac, 25.0, 1e4}; }
};

/// Scales `grads` in place so its global L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_gradients(VitParams& grads, double max_norm);

struct AdamState {
  VitParams m;
  VitParams v;
  std::size_t step = 0;
};

AdamState make_adam_state(const VitConfig& cfg);

/// Adam moment update plus decoupled weight decay: theta -= lr * decay * theta.
void adamw_step(VitParams& params, const VitParams& grads, AdamState& state, double lr,
                const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  double lr = 0.0;  // at the last step of the epoch
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 1-based
  bool stopped_early = false;
};

void write_history_csv(std::ostream& out, const TrainHistory& history);

/// Images are [0,1] renders; standardisation happens inside.
struct LabeledImages {
  std::vector<SpectroImage> images;
  std::vector<int> labels;
};

struct Metrics {
  double loss = 0.0;
  double accuracy = 0.0;  // fraction in [0, 1]
};

/// Mean loss and fraction correct over already-standardised images; no
/// augmentation and no parameter updates.
Metrics epoch_metrics(const VitModel& model, std::span<const Image> standardized,
                      std::span<const int> labels, double alpha);

/// Observes every sample the training loop consumes (for pipeline checks).
using SampleObserver = std::function<void(SplitKind split, std::size_t index, bool augmented)>;

struct TrainResult {
  VitModel model;  // parameters of the best validation epoch
  TrainHistory history;
};

TrainResult train(VitModel model, const LabeledImages& train_set, const LabeledImages& val_set,
                  const ChannelStats& stats, const TrainConfig& cfg, const SampleObserver& observer = {});

}  // namespace specvit
