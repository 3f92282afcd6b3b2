#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "specvit/config.hpp"
#include "specvit/imaging.hpp"
#include "specvit/segmentation.hpp"
#include "specvit/spectral.hpp"
#include "specvit/trace.hpp"
#include "specvit/training.hpp"

namespace specvit {

/// Everything between raw traces and rendered images for one configuration.
struct FeatureSettings {
  std::size_t seg_len = 100;
  double overlap = 0.0;
  TransformSpec transform;
  std::size_t image_size = 224;
  Colormap colormap = Colormap::Grayscale3;
  ResizeMethod resize = ResizeMethod::Bilinear;
  bool per_device_bounds = true;
  /// Trailing fraction of every trace held out for cross-configuration tests.
  double ood_fraction = 0.0;

  void validate() const;
  SegmentationParams segmentation() const { return {seg_len, overlap}; }
};

/// Packet index where the held-out suffix of a trace begins.
std::size_t in_distribution_end(const PacketTrace& trace, double ood_fraction);

struct SpectrogramSet {
  std::vector<Spectrogram> specs;
  std::vector<int> labels;            // device id per spectrogram
  std::vector<std::size_t> starts;    // packet offset of each source segment
};

/// Segments packets [begin[d], end[d]) of every trace, mean-centres and
/// transforms each segment. Output is ordered by device, then segment.
SpectrogramSet build_spectrograms(std::span<const PacketTrace> traces, const SegmentationParams& seg,
                                  const TransformSpec& transform, std::span<const std::size_t> begin,
                                  std::span<const std::size_t> end);

/// Percentile bounds from the training indices only.
NormalizationSidecar fit_bounds(const SpectrogramSet& set, std::span<const std::size_t> train_indices,
                                bool per_device);

std::vector<SpectroImage> render_all(const SpectrogramSet& set, const NormalizationSidecar& norm,
                                     const FeatureSettings& settings);

struct PreparedDataset {
  SpectrogramSet spectrograms;
  DatasetSplit split;
  NormalizationSidecar norm;  // bounds and channel stats, training split only
  std::vector<SpectroImage> images;
  std::vector<std::size_t> region_end;  // per device, exclusive
};

PreparedDataset prepare_dataset(std::span<const PacketTrace> traces, const FeatureSettings& settings,
                                const SplitSpec& split_spec);

LabeledImages gather(const PreparedDataset& data, std::span<const std::size_t> indices);

FeatureSettings feature_settings_from_config(const KeyValueConfig& cfg);
VitConfig vit_config_from_config(const KeyValueConfig& cfg, std::size_t image_size, std::size_t num_classes);
TrainConfig train_config_from_config(const KeyValueConfig& cfg, std::uint64_t seed);
SplitSpec split_spec_from_config(const KeyValueConfig& cfg, std::uint64_t seed);

}  // namespace specvit
