#include "specvit/training.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <string>

#include "specvit/config.hpp"
#include "specvit/errors.hpp"
#include "specvit/rng.hpp"

namespace specvit {
namespace {

constexpr std::size_t kMinImagesPerDevice = 7;

std::vector<Image> standardize_all(std::span<const SpectroImage> images, const ChannelStats& stats) {
  std::vector<Image> out;
  out.reserve(images.size());
  for (const auto& img : images) out.push_back(standardize_image(img, stats));
  return out;
}

}  // namespace

void SplitSpec::validate() const {
  if (!(train_frac > 0.0 && val_frac > 0.0 && test_frac > 0.0))
    throw ValidationError("split fractions must be positive");
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-12)
    throw ValidationError("split fractions must sum to 1");
}

std::string_view to_string(SplitKind k) {
  switch (k) {
    case SplitKind::Train: return "train";
    case SplitKind::Val: return "val";
    case SplitKind::Test: return "test";
  }
  return "?";
}

DatasetSplit split_dataset(std::span<const int> device_of_sample, const SplitSpec& spec) {
  spec.validate();
  std::map<int, std::vector<std::size_t>> by_device;
  for (std::size_t i = 0; i < device_of_sample.size(); ++i) by_device[device_of_sample[i]].push_back(i);

  DatasetSplit out;
  for (auto& [device, indices] : by_device) {
    const std::size_t n = indices.size();
    if (n < kMinImagesPerDevice)
      throw ValidationError("device " + std::to_string(device) + " has " + std::to_string(n) +
                            " images; splitting needs at least " + std::to_string(kMinImagesPerDevice));
    Rng rng(spec.seed ^ static_cast<std::uint64_t>(device));
    rng.shuffle(indices.begin(), indices.end());
    const auto n_val = static_cast<std::size_t>(std::llround(spec.val_frac * static_cast<double>(n)));
    const auto n_test = static_cast<std::size_t>(std::llround(spec.test_frac * static_cast<double>(n)));
    const std::size_t n_train = n - n_val - n_test;
    out.train.insert(out.train.end(), indices.begin(), indices.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.val.insert(out.val.end(), indices.begin() + static_cast<std::ptrdiff_t>(n_train),
                   indices.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
    out.test.insert(out.test.end(), indices.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), indices.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

void write_split_csv(std::ostream& out, std::span<const int> device_of_sample, const DatasetSplit& split) {
  std::vector<SplitKind> kind(device_of_sample.size(), SplitKind::Train);
  for (auto i : split.val) kind[i] = SplitKind::Val;
  for (auto i : split.test) kind[i] = SplitKind::Test;
  out << "device_id,image_index,split\n";
  for (std::size_t i = 0; i < device_of_sample.size(); ++i)
    out << device_of_sample[i] << ',' << i << ',' << to_string(kind[i]) << '\n';
}

DatasetSplit read_split_csv(std::istream& in, std::size_t sample_count, const std::string& source) {
  std::string line;
  std::size_t line_no = 1;
  if (!std::getline(in, line) || line != "device_id,image_index,split")
    throw ParseError(source, 1, "expected split header");
  DatasetSplit out;
  std::vector<bool> seen(sample_count, false);
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto c1 = line.find(','), c2 = line.rfind(',');
    if (c1 == std::string::npos || c1 == c2) throw ParseError(source, line_no, "expected 3 fields");
    std::size_t index = 0;
    try {
      index = static_cast<std::size_t>(parse_int(std::string_view(line).substr(c1 + 1, c2 - c1 - 1)));
    } catch (const ValidationError& e) {
      throw ParseError(source, line_no, e.what());
    }
    if (index >= sample_count || seen[index]) throw ParseError(source, line_no, "bad image_index");
    seen[index] = true;
    const auto kind = line.substr(c2 + 1);
    if (kind == "train") out.train.push_back(index);
    else if (kind == "val") out.val.push_back(index);
    else if (kind == "test") out.test.push_back(index);
    else throw ParseError(source, line_no, "unknown split '" + kind + "'");
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    throw ValidationError(source + ": split does not cover every image");
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.val.begin(), out.val.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

double OneCycleSchedule::at(std::size_t step, std::size_t total_steps) const {
  if (total_steps == 0 || step >= total_steps)
    throw ValidationError("lr step " + std::to_string(step) + " outside [0, " + std::to_string(total_steps) + ")");
  const double initial = peak_lr / div_factor;
  const double floor_lr = peak_lr / final_div_factor;
  const double last = static_cast<double>(total_steps - 1);
  const double warm_end = warmup_frac * last;
  const auto s = static_cast<double>(step);
  if (total_steps == 1) return initial;
  if (s <= warm_end) {
    if (warm_end <= 0.0) return peak_lr;
    return initial + (peak_lr - initial) * s / warm_end;
  }
  const double pct = (s - warm_end) / (last - warm_end);
  return floor_lr + (peak_lr - floor_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * pct));
}

double lr_at(std::size_t step, std::size_t total_steps, double peak_lr) {
  return OneCycleSchedule{peak_lr}.at(step, total_steps);
}

void TrainConfig::validate() const {
  if (batch_size == 0 || max_epochs == 0 || patience == 0)
    throw ValidationError("batch_size, max_epochs and patience must be positive");
  if (patience > max_epochs) throw ValidationError("patience must not exceed max_epochs");
  if (!(peak_lr > 0.0) || !(weight_decay >= 0.0) || !(clip_norm > 0.0))
    throw ValidationError("peak_lr and clip_norm must be > 0, weight_decay >= 0");
  if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
    throw ValidationError("label_smoothing must lie in [0, 1)");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0))
    throw ValidationError("Adam betas must lie in (0, 1)");
  if (!(warmup_frac > 0.0 && warmup_frac < 1.0)) throw ValidationError("warmup_frac must lie in (0, 1)");
}

double clip_gradients(VitParams& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (const auto& t : tensor_views(grads))
      for (double& v : t.values()) v *= scale;
  }
  return norm;
}

AdamState make_adam_state(const VitConfig& cfg) { return {zero_params(cfg), zero_params(cfg), 0}; }

void adamw_step(VitParams& params, const VitParams& grads, AdamState& state, double lr,
                const TrainConfig& cfg) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  const auto p = tensor_views(params);
  const auto g = tensor_views(grads);
  const auto m = tensor_views(state.m);
  const auto v = tensor_views(state.v);
  for (std::size_t t = 0; t < p.size(); ++t) {
    auto pv = p[t].values();
    const auto gv = g[t].values();
    auto mv = m[t].values();
    auto vv = v[t].values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
      mv[i] = cfg.beta1 * mv[i] + (1.0 - cfg.beta1) * gv[i];
      vv[i] = cfg.beta2 * vv[i] + (1.0 - cfg.beta2) * gv[i] * gv[i];
      pv[i] -= lr * cfg.weight_decay * pv[i];
      pv[i] -= lr * (mv[i] / bc1) / (std::sqrt(vv[i] / bc2) + cfg.adam_eps);
    }
  }
}

void write_history_csv(std::ostream& out, const TrainHistory& history) {
  out << "epoch,train_loss,train_acc,val_loss,val_acc,lr\n";
  for (const auto& e : history.epochs)
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << format_double(e.train_acc) << ','
        << format_double(e.val_loss) << ',' << format_double(e.val_acc) << ',' << format_double(e.lr) << '\n';
}

Metrics epoch_metrics(const VitModel& model, std::span<const Image> standardized, std::span<const int> labels,
                      double alpha) {
  if (standardized.empty()) throw ValidationError("epoch_metrics: empty dataset");
  if (standardized.size() != labels.size()) throw ValidationError("epoch_metrics: size mismatch");
  Metrics m;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < standardized.size(); ++i) {
    const auto pred = forward(standardized[i], model);
    m.loss += loss_from_logits(pred.logits, labels[i], alpha);
    if (pred.predicted == labels[i]) ++correct;
  }
  m.loss /= static_cast<double>(standardized.size());
  m.accuracy = static_cast<double>(correct) / static_cast<double>(standardized.size());
  return m;
}

TrainResult train(VitModel model, const LabeledImages& train_set, const LabeledImages& val_set,
                  const ChannelStats& stats, const TrainConfig& cfg, const SampleObserver& observer) {
  cfg.validate();
  if (train_set.images.empty() || val_set.images.empty())
    throw ValidationError("training and validation splits must be non-empty");
  if (train_set.images.size() != train_set.labels.size() || val_set.images.size() != val_set.labels.size())
    throw ValidationError("image/label count mismatch");

  const auto val_std = standardize_all(val_set.images, stats);
  const std::size_t n = train_set.images.size();
  const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = batches * cfg.max_epochs;
  const auto schedule = cfg.schedule();

  AdamState adam = make_adam_state(model.config);
  TrainResult result{model, {}};
  double best_val = -1.0;
  std::size_t since_best = 0;
  std::vector<std::size_t> order(n);
  std::vector<Image> batch_images;
  std::vector<int> batch_labels;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng(derive_seed(cfg.seed, "train.shuffle", epoch)).shuffle(order.begin(), order.end());

    EpochRecord rec;
    rec.epoch = epoch;
    std::size_t correct = 0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * cfg.batch_size, end = std::min(n, begin + cfg.batch_size);
      batch_images.clear();
      batch_labels.clear();
      for (std::size_t k = begin; k < end; ++k) {
        const std::size_t idx = order[k];
        const auto& raw = train_set.images[idx];
        if (observer) observer(SplitKind::Train, idx, cfg.augment);
        if (cfg.augment) {
          const auto seed = derive_seed(cfg.seed, "train.augment", (epoch - 1) * n + idx);
          batch_images.push_back(standardize_image(augment(raw, cfg.augmentation, seed), stats));
        } else {
          batch_images.push_back(standardize_image(raw, stats));
        }
        batch_labels.push_back(train_set.labels[idx]);
      }
      const std::size_t step = (epoch - 1) * batches + b;
      Gradients g;
      try {
        g = backward(model, batch_images, batch_labels, cfg.label_smoothing);
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + " step " + std::to_string(step) + ": " + e.what());
      }
      if (!std::isfinite(g.mean_loss))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + " step " + std::to_string(step));
      clip_gradients(g.grads, cfg.clip_norm);
      rec.lr = schedule.at(step, total_steps);
      adamw_step(model.params, g.grads, adam, rec.lr, cfg);

      rec.train_loss += g.mean_loss * static_cast<double>(end - begin);
      for (std::size_t k = 0; k < g.predicted.size(); ++k)
        if (g.predicted[k] == batch_labels[k]) ++correct;
    }
    rec.train_loss /= static_cast<double>(n);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);

    if (observer)
      for (std::size_t i = 0; i < val_std.size(); ++i) observer(SplitKind::Val, i, false);
    // Validation loss uses the unsmoothed labels.
    const auto val = epoch_metrics(model, val_std, val_set.labels, 0.0);
    rec.val_loss = val.loss;
    rec.val_acc = val.accuracy;
    result.history.epochs.push_back(rec);

    if (rec.val_acc > best_val) {
      best_val = rec.val_acc;
      result.history.best_epoch = epoch;
      result.model = model;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      result.history.stopped_early = epoch < cfg.max_epochs;
      break;
    }
  }
  return result;
}

}  // namespace specvit
