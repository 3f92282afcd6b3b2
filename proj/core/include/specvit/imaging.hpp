#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "specvit/spectral.hpp"

namespace specvit {

/// Device id carried by bounds fitted across all devices.
inline constexpr int kGlobalBounds = -1;

struct PercentileBounds {
  int device_id = 0;
  double v_min = 0.0;  // 5th percentile
  double v_max = 0.0;  // 95th percentile
  std::size_t fitted_on = 0;
};

/// H x W x 3 image, interleaved channels, row-major.
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w, double fill = 0.0) : height(h), width(w), pixels(h * w * 3, fill) {}

  double& at(std::size_t h, std::size_t w, std::size_t c) { return pixels[(h * width + w) * 3 + c]; }
  double at(std::size_t h, std::size_t w, std::size_t c) const {
    return pixels[(h * width + w) * 3 + c];
  }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Rendered spectrogram, all pixels in [0, 1].
using SpectroImage = Image;

struct ChannelStats {
  std::array<double, 3> mean{};
  std::array<double, 3> stddev{};
  std::size_t fitted_on = 0;
};

enum class Colormap { Grayscale3, Viridis };
enum class ResizeMethod { Bilinear, Nearest };

Colormap parse_colormap(std::string_view s);
std::string_view to_string(Colormap c);
ResizeMethod parse_resize(std::string_view s);
std::string_view to_string(ResizeMethod r);

/// Linear interpolation between closest ranks; q in [0, 100]. Sorts `values`.
double percentile(std::vector<double>& values, double q);

/// Pools every entry of the given training spectrograms of one device.
PercentileBounds fit_percentile_bounds(std::span<const Spectrogram> train_specs);
/// Pools every entry across devices (honest-inference mode).
PercentileBounds fit_global_bounds(std::span<const Spectrogram> train_specs);

/// (S - v_min) / (v_max - v_min) clipped to [0, 1]; constant 0.5 when the
/// bounds are degenerate. Matrix orientation is preserved.
Eigen::MatrixXd normalize_spectrogram(const Spectrogram& spec, const PercentileBounds& bounds);

/// Corner-aligned resize.
Eigen::MatrixXd resize(const Eigen::MatrixXd& m, std::size_t rows, std::size_t cols,
                       ResizeMethod method = ResizeMethod::Bilinear);

/// Maps a [0,1] scalar through the colormap.
std::array<double, 3> apply_colormap(double v, Colormap cmap);

SpectroImage render_image(const Eigen::MatrixXd& normalized, std::size_t image_size,
                          Colormap cmap = Colormap::Grayscale3,
                          ResizeMethod method = ResizeMethod::Bilinear);

ChannelStats fit_channel_stats(std::span<const SpectroImage> train_images);

Image standardize_image(const SpectroImage& img, const ChannelStats& stats);

struct AugmentConfig {
  double hflip_p = 0.5;
  double vflip_p = 0.3;
  double rotate_deg = 5.0;
  double translate_frac = 0.1;
  double scale_min = 0.9;
  double scale_max = 1.1;
  double brightness = 0.2;
  double contrast = 0.2;
  double blur_p = 1.0;
  double blur_sigma_min = 0.1;
  double blur_sigma_max = 0.5;

  /// Every transform disabled.
  static AugmentConfig identity();
};

SpectroImage flip_horizontal(const SpectroImage& img);
SpectroImage flip_vertical(const SpectroImage& img);

/// Seeded training-time augmentation; output stays in [0, 1].
SpectroImage augment(const SpectroImage& img, const AugmentConfig& cfg, std::uint64_t seed);

/// Normalisation statistics fitted on a training split, persisted next to
/// images and checkpoints so later runs reuse them bit-identically.
struct NormalizationSidecar {
  bool per_device = true;
  std::vector<PercentileBounds> bounds;  // per device, or one global entry
  ChannelStats channels;

  const PercentileBounds& bounds_for(int device_id) const;
};

void save_sidecar(const std::filesystem::path& path, const NormalizationSidecar& sidecar);
NormalizationSidecar load_sidecar(const std::filesystem::path& path);

}  // namespace specvit
