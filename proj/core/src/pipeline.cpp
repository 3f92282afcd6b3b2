#include "specvit/pipeline.hpp"

#include <cmath>

#include "specvit/errors.hpp"
#include "specvit/rng.hpp"

namespace specvit {

void FeatureSettings::validate() const {
  (void)segmentation();
  if (transform.method == Method::Stft) {
    const StftParams p(transform.resolution, transform.frame_stride_frac, transform.epsilon);
    if (seg_len < p.resolution()) throw ValidationError("segment length shorter than the STFT window");
  } else {
    (void)CwtParams(transform.resolution, transform.center_freq, transform.epsilon);
  }
  if (image_size == 0) throw ValidationError("image_size must be > 0");
  if (!(ood_fraction >= 0.0 && ood_fraction < 1.0)) throw ValidationError("ood_fraction must lie in [0, 1)");
}

std::size_t in_distribution_end(const PacketTrace& trace, double ood_fraction) {
  return trace.count() - static_cast<std::size_t>(std::floor(static_cast<double>(trace.count()) * ood_fraction));
}

SpectrogramSet build_spectrograms(std::span<const PacketTrace> traces, const SegmentationParams& seg,
                                  const TransformSpec& transform, std::span<const std::size_t> begin,
                                  std::span<const std::size_t> end) {
  if (begin.size() != traces.size() || end.size() != traces.size())
    throw ValidationError("one region per trace required");
  SpectrogramSet set;
  for (std::size_t d = 0; d < traces.size(); ++d) {
    for (auto& segment : segment_trace(traces[d], seg, begin[d], end[d])) {
      const auto start = segment.start;
      set.specs.push_back(compute_spectrogram(mean_center(std::move(segment)), transform));
      set.labels.push_back(traces[d].device_id);
      set.starts.push_back(start);
    }
  }
  return set;
}

NormalizationSidecar fit_bounds(const SpectrogramSet& set, std::span<const std::size_t> train_indices,
                                bool per_device) {
  NormalizationSidecar norm;
  norm.per_device = per_device;
  if (per_device) {
    int max_device = -1;
    for (auto i : train_indices) max_device = std::max(max_device, set.labels[i]);
    for (int d = 0; d <= max_device; ++d) {
      std::vector<Spectrogram> device_specs;
      for (auto i : train_indices)
        if (set.labels[i] == d) device_specs.push_back(set.specs[i]);
      if (device_specs.empty())
        throw ValidationError("device " + std::to_string(d) + " has no training spectrograms");
      norm.bounds.push_back(fit_percentile_bounds(device_specs));
    }
  } else {
    std::vector<Spectrogram> train;
    for (auto i : train_indices) train.push_back(set.specs[i]);
    norm.bounds.push_back(fit_global_bounds(train));
  }
  return norm;
}

std::vector<SpectroImage> render_all(const SpectrogramSet& set, const NormalizationSidecar& norm,
                                     const FeatureSettings& settings) {
  std::vector<SpectroImage> images;
  images.reserve(set.specs.size());
  for (const auto& spec : set.specs) {
    Spectrogram oriented = spec;
    oriented.power_db = frequency_major(spec);
    images.push_back(render_image(normalize_spectrogram(oriented, norm.bounds_for(spec.device_id)),
                                  settings.image_size, settings.colormap, settings.resize));
  }
  return images;
}

PreparedDataset prepare_dataset(std::span<const PacketTrace> traces, const FeatureSettings& settings,
                                const SplitSpec& split_spec) {
  settings.validate();
  validate_corpus(traces);
  PreparedDataset data;
  std::vector<std::size_t> begin(traces.size(), 0);
  data.region_end.resize(traces.size());
  for (std::size_t d = 0; d < traces.size(); ++d)
    data.region_end[d] = in_distribution_end(traces[d], settings.ood_fraction);
  data.spectrograms =
      build_spectrograms(traces, settings.segmentation(), settings.transform, begin, data.region_end);
  data.split = split_dataset(data.spectrograms.labels, split_spec);
  data.norm = fit_bounds(data.spectrograms, data.split.train, settings.per_device_bounds);
  data.images = render_all(data.spectrograms, data.norm, settings);

  std::vector<SpectroImage> train_images;
  train_images.reserve(data.split.train.size());
  for (auto i : data.split.train) train_images.push_back(data.images[i]);
  data.norm.channels = fit_channel_stats(train_images);
  return data;
}

LabeledImages gather(const PreparedDataset& data, std::span<const std::size_t> indices) {
  LabeledImages out;
  out.images.reserve(indices.size());
  for (auto i : indices) {
    out.images.push_back(data.images[i]);
    out.labels.push_back(data.spectrograms.labels[i]);
  }
  return out;
}

FeatureSettings feature_settings_from_config(const KeyValueConfig& cfg) {
  FeatureSettings s;
  s.seg_len = static_cast<std::size_t>(cfg.get_int("seg_len", 100));
  s.overlap = cfg.get_double("overlap", 0.0);
  s.transform.method = parse_method(cfg.get_string("method", "STFT"));
  s.transform.resolution = static_cast<std::size_t>(cfg.get_int("resolution", 16));
  s.transform.frame_stride_frac = cfg.get_double("frame_stride", 0.5);
  s.transform.center_freq = cfg.get_double("center_freq", kMorletCenterFrequency);
  s.transform.epsilon = cfg.get_double("epsilon", kDefaultEpsilon);
  s.image_size = static_cast<std::size_t>(cfg.get_int("image_size", 224));
  s.colormap = parse_colormap(cfg.get_string("colormap", "grayscale3"));
  s.resize = parse_resize(cfg.get_string("resize", "bilinear"));
  const auto mode = cfg.get_string("norm_mode", "per_device");
  if (mode != "per_device" && mode != "global") throw ValidationError("norm_mode must be per_device or global");
  s.per_device_bounds = mode == "per_device";
  s.ood_fraction = cfg.get_double("ood_fraction", 0.0);
  s.validate();
  return s;
}

VitConfig vit_config_from_config(const KeyValueConfig& cfg, std::size_t image_size, std::size_t num_classes) {
  VitConfig v;
  v.image_size = image_size;
  v.num_classes = num_classes;
  v.patch_size = static_cast<std::size_t>(cfg.get_int("vit.patch_size", 16));
  v.embed_dim = static_cast<std::size_t>(cfg.get_int("vit.embed_dim", 192));
  v.num_layers = static_cast<std::size_t>(cfg.get_int("vit.layers", 4));
  v.num_heads = static_cast<std::size_t>(cfg.get_int("vit.heads", 3));
  v.mlp_dim = static_cast<std::size_t>(cfg.get_int("vit.mlp_dim", 2 * static_cast<std::int64_t>(v.embed_dim)));
  v.ln_eps = cfg.get_double("vit.ln_eps", v.ln_eps);
  v.validate();
  return v;
}

TrainConfig train_config_from_config(const KeyValueConfig& cfg, std::uint64_t seed) {
  TrainConfig t;
  t.batch_size = static_cast<std::size_t>(cfg.get_int("train.batch_size", 16));
  t.max_epochs = static_cast<std::size_t>(cfg.get_int("train.max_epochs", 50));
  t.patience = static_cast<std::size_t>(cfg.get_int("train.patience", 15));
  t.peak_lr = cfg.get_double("train.peak_lr", 1e-4);
  t.warmup_frac = cfg.get_double("train.warmup_frac", 0.3);
  t.weight_decay = cfg.get_double("train.weight_decay", 0.05);
  t.clip_norm = cfg.get_double("train.clip_norm", 1.0);
  t.label_smoothing = cfg.get_double("train.label_smoothing", 0.1);
  t.beta1 = cfg.get_double("train.beta1", 0.9);
  t.beta2 = cfg.get_double("train.beta2", 0.999);
  t.augment = cfg.get_bool("train.augment", true);
  auto& a = t.augmentation;
  a.hflip_p = cfg.get_double("augment.hflip_p", a.hflip_p);
  a.vflip_p = cfg.get_double("augment.vflip_p", a.vflip_p);
  a.rotate_deg = cfg.get_double("augment.rotate_deg", a.rotate_deg);
  a.translate_frac = cfg.get_double("augment.translate_frac", a.translate_frac);
  a.scale_min = cfg.get_double("augment.scale_min", a.scale_min);
  a.scale_max = cfg.get_double("augment.scale_max", a.scale_max);
  a.brightness = cfg.get_double("augment.brightness", a.brightness);
  a.contrast = cfg.get_double("augment.contrast", a.contrast);
  a.blur_p = cfg.get_double("augment.blur_p", a.blur_p);
  a.blur_sigma_min = cfg.get_double("augment.blur_sigma_min", a.blur_sigma_min);
  a.blur_sigma_max = cfg.get_double("augment.blur_sigma_max", a.blur_sigma_max);
  t.seed = derive_seed(seed, "train");
  t.validate();
  return t;
}

SplitSpec split_spec_from_config(const KeyValueConfig& cfg, std::uint64_t seed) {
  // Fractions may be written as "a/b" so 5/7 sums to exactly 1 with 1/7 + 1/7.
  const auto fraction = [&](std::string_view key, double fallback) {
    const auto v = cfg.find(key);
    if (!v) return fallback;
    const auto slash = v->find('/');
    if (slash == std::string::npos) return parse_double(*v);
    return parse_double(std::string_view(*v).substr(0, slash)) /
           parse_double(std::string_view(*v).substr(slash + 1));
  };
  SplitSpec s;
  s.train_frac = fraction("split.train", s.train_frac);
  s.val_frac = fraction("split.val", s.val_frac);
  s.test_frac = fraction("split.test", s.test_frac);
  s.seed = derive_seed(seed, "split");
  s.validate();
  return s;
}

}  // namespace specvit
