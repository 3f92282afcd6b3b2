#include "specvit/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>

#include "specvit/config.hpp"
#include "specvit/errors.hpp"
#include "specvit/rng.hpp"

namespace specvit {
namespace {

constexpr double kViridis[256][3] = {
#include "viridis_lut.inc"
};

constexpr double kDegenerateSpan = 1e-12;
constexpr double kDegenerateStd = 1e-12;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

std::vector<double> pooled_entries(std::span<const Spectrogram> specs) {
  std::size_t total = 0;
  for (const auto& s : specs) total += static_cast<std::size_t>(s.power_db.size());
  std::vector<double> pooled;
  pooled.reserve(total);
  for (const auto& s : specs)
    pooled.insert(pooled.end(), s.power_db.data(), s.power_db.data() + s.power_db.size());
  return pooled;
}

/// Bilinear sample with zero fill outside the image.
double sample_zero(const SpectroImage& img, double y, double x, std::size_t c) {
  const double fy = std::floor(y), fx = std::floor(x);
  const auto y0 = static_cast<std::ptrdiff_t>(fy), x0 = static_cast<std::ptrdiff_t>(fx);
  const double dy = y - fy, dx = x - fx;
  const auto h = static_cast<std::ptrdiff_t>(img.height), w = static_cast<std::ptrdiff_t>(img.width);
  auto px = [&](std::ptrdiff_t yy, std::ptrdiff_t xx) {
    if (yy < 0 || yy >= h || xx < 0 || xx >= w) return 0.0;
    return img.at(static_cast<std::size_t>(yy), static_cast<std::size_t>(xx), c);
  };
  return (1 - dy) * ((1 - dx) * px(y0, x0) + dx * px(y0, x0 + 1)) +
         dy * ((1 - dx) * px(y0 + 1, x0) + dx * px(y0 + 1, x0 + 1));
}

SpectroImage affine(const SpectroImage& img, double angle_deg, double tx, double ty, double scale) {
  SpectroImage out(img.height, img.width);
  const double cy = 0.5 * static_cast<double>(img.height - 1);
  const double cx = 0.5 * static_cast<double>(img.width - 1);
  const double a = angle_deg * std::numbers::pi / 180.0;
  const double ca = std::cos(a), sa = std::sin(a);
  for (std::size_t h = 0; h < img.height; ++h) {
    for (std::size_t w = 0; w < img.width; ++w) {
      // Inverse map: undo translation, rotation, then scale about the centre.
      const double ox = static_cast<double>(w) - cx - tx;
      const double oy = static_cast<double>(h) - cy - ty;
      const double sx = (ca * ox + sa * oy) / scale + cx;
      const double sy = (-sa * ox + ca * oy) / scale + cy;
      for (std::size_t c = 0; c < 3; ++c) out.at(h, w, c) = sample_zero(img, sy, sx, c);
    }
  }
  return out;
}

SpectroImage gaussian_blur3(const SpectroImage& img, double sigma) {
  const double e = std::exp(-1.0 / (2.0 * sigma * sigma));
  const double k[3] = {e / (1 + 2 * e), 1 / (1 + 2 * e), e / (1 + 2 * e)};
  const auto reflect = [](std::ptrdiff_t i, std::ptrdiff_t n) {
    if (n == 1) return std::ptrdiff_t{0};
    if (i < 0) return -i;
    if (i >= n) return 2 * n - 2 - i;
    return i;
  };
  const auto h = static_cast<std::ptrdiff_t>(img.height), w = static_cast<std::ptrdiff_t>(img.width);
  SpectroImage tmp(img.height, img.width), out(img.height, img.width);
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t d = -1; d <= 1; ++d)
          acc += k[d + 1] * img.at(static_cast<std::size_t>(y),
                                   static_cast<std::size_t>(reflect(x + d, w)), c);
        tmp.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = acc;
      }
  for (std::ptrdiff_t y = 0; y < h; ++y)
    for (std::ptrdiff_t x = 0; x < w; ++x)
      for (std::size_t c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (std::ptrdiff_t d = -1; d <= 1; ++d)
          acc += k[d + 1] * tmp.at(static_cast<std::size_t>(reflect(y + d, h)),
                                   static_cast<std::size_t>(x), c);
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = acc;
      }
  return out;
}

}  // namespace

Colormap parse_colormap(std::string_view s) {
  if (s == "grayscale3") return Colormap::Grayscale3;
  if (s == "viridis-lut" || s == "viridis") return Colormap::Viridis;
  throw ValidationError("unknown colormap '" + std::string(s) + "'");
}

std::string_view to_string(Colormap c) { return c == Colormap::Grayscale3 ? "grayscale3" : "viridis-lut"; }

ResizeMethod parse_resize(std::string_view s) {
  if (s == "bilinear") return ResizeMethod::Bilinear;
  if (s == "nearest") return ResizeMethod::Nearest;
  throw ValidationError("unknown resize method '" + std::string(s) + "'");
}

std::string_view to_string(ResizeMethod r) { return r == ResizeMethod::Bilinear ? "bilinear" : "nearest"; }

double percentile(std::vector<double>& values, double q) {
  if (values.empty()) throw ValidationError("percentile of an empty set");
  if (!(q >= 0.0 && q <= 100.0)) throw ValidationError("percentile rank outside [0, 100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

PercentileBounds fit_percentile_bounds(std::span<const Spectrogram> train_specs) {
  if (train_specs.empty()) throw ValidationError("no training spectrograms to fit bounds on");
  const int device = train_specs.front().device_id;
  for (const auto& s : train_specs)
    if (s.device_id != device)
      throw ValidationError("percentile bounds fitted on spectrograms of mixed devices");
  auto pooled = pooled_entries(train_specs);
  PercentileBounds b;
  b.device_id = device;
  b.v_min = percentile(pooled, 5.0);
  b.v_max = percentile(pooled, 95.0);
  b.fitted_on = train_specs.size();
  return b;
}

PercentileBounds fit_global_bounds(std::span<const Spectrogram> train_specs) {
  if (train_specs.empty()) throw ValidationError("no training spectrograms to fit bounds on");
  auto pooled = pooled_entries(train_specs);
  PercentileBounds b;
  b.device_id = kGlobalBounds;
  b.v_min = percentile(pooled, 5.0);
  b.v_max = percentile(pooled, 95.0);
  b.fitted_on = train_specs.size();
  return b;
}

Eigen::MatrixXd normalize_spectrogram(const Spectrogram& spec, const PercentileBounds& bounds) {
  if (bounds.device_id != kGlobalBounds && bounds.device_id != spec.device_id)
    throw ValidationError("bounds for device " + std::to_string(bounds.device_id) +
                          " applied to a spectrogram of device " + std::to_string(spec.device_id));
  const double span = bounds.v_max - bounds.v_min;
  if (span < kDegenerateSpan)
    return Eigen::MatrixXd::Constant(spec.power_db.rows(), spec.power_db.cols(), 0.5);
  const double lo = bounds.v_min;
  return spec.power_db.unaryExpr([lo, span](double v) { return clamp01((v - lo) / span); });
}

Eigen::MatrixXd resize(const Eigen::MatrixXd& m, std::size_t rows, std::size_t cols,
                       ResizeMethod method) {
  if (m.size() == 0) throw ValidationError("cannot resize an empty matrix");
  if (rows == 0 || cols == 0) throw ValidationError("resize target must be non-empty");
  const auto in_r = static_cast<std::size_t>(m.rows()), in_c = static_cast<std::size_t>(m.cols());
  // Corner alignment: output index i maps to i * (in - 1) / (out - 1).
  const auto src = [](std::size_t i, std::size_t in, std::size_t out) {
    if (out == 1 || in == 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
  };
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < rows; ++i) {
    const double y = src(i, in_r, rows);
    const auto y0 = std::min(static_cast<std::size_t>(std::floor(y)), in_r - 1);
    const auto y1 = std::min(y0 + 1, in_r - 1);
    const double dy = y - static_cast<double>(y0);
    for (std::size_t j = 0; j < cols; ++j) {
      const double x = src(j, in_c, cols);
      const auto x0 = std::min(static_cast<std::size_t>(std::floor(x)), in_c - 1);
      const auto x1 = std::min(x0 + 1, in_c - 1);
      const double dx = x - static_cast<double>(x0);
      double v;
      if (method == ResizeMethod::Nearest) {
        v = m(static_cast<Eigen::Index>(dy < 0.5 ? y0 : y1), static_cast<Eigen::Index>(dx < 0.5 ? x0 : x1));
      } else {
        const auto at = [&](std::size_t r, std::size_t c) {
          return m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
        };
        v = (1 - dy) * ((1 - dx) * at(y0, x0) + dx * at(y0, x1)) +
            dy * ((1 - dx) * at(y1, x0) + dx * at(y1, x1));
      }
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return out;
}

std::array<double, 3> apply_colormap(double v, Colormap cmap) {
  if (cmap == Colormap::Grayscale3) return {v, v, v};
  const double pos = clamp01(v) * 255.0;
  const auto i0 = std::min(static_cast<std::size_t>(pos), std::size_t{254});
  const double t = pos - static_cast<double>(i0);
  std::array<double, 3> rgb{};
  for (std::size_t c = 0; c < 3; ++c)
    rgb[c] = (1 - t) * kViridis[i0][c] + t * kViridis[i0 + 1][c];
  return rgb;
}

SpectroImage render_image(const Eigen::MatrixXd& normalized, std::size_t image_size, Colormap cmap,
                          ResizeMethod method) {
  if (image_size == 0) throw ValidationError("image size must be > 0");
  if (normalized.size() == 0) throw ValidationError("cannot render an empty matrix");
  if ((normalized.array() < 0.0).any() || (normalized.array() > 1.0).any() || !normalized.allFinite())
    throw ValidationError("render_image expects values in [0, 1]");
  const auto resized = resize(normalized, image_size, image_size, method);
  SpectroImage img(image_size, image_size);
  for (std::size_t h = 0; h < image_size; ++h)
    for (std::size_t w = 0; w < image_size; ++w) {
      // Bilinear weights are convex, so values stay in [0, 1] up to rounding.
      const double v = clamp01(resized(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(w)));
      const auto rgb = apply_colormap(v, cmap);
      for (std::size_t c = 0; c < 3; ++c) img.at(h, w, c) = rgb[c];
    }
  return img;
}

ChannelStats fit_channel_stats(std::span<const SpectroImage> train_images) {
  if (train_images.empty()) throw ValidationError("no training images to fit channel stats on");
  const std::size_t per_image = train_images.front().height * train_images.front().width;
  for (const auto& img : train_images)
    if (img.height * img.width != per_image)
      throw ValidationError("training images differ in size");

  // Two passes: means first, then squared deviations about them.
  ChannelStats stats;
  std::array<double, 3> sum{};
  for (const auto& img : train_images)
    for (std::size_t p = 0; p < per_image; ++p)
      for (std::size_t c = 0; c < 3; ++c) sum[c] += img.pixels[p * 3 + c];
  const double n = static_cast<double>(per_image * train_images.size());
  for (std::size_t c = 0; c < 3; ++c) stats.mean[c] = sum[c] / n;

  std::array<double, 3> ss{};
  for (const auto& img : train_images)
    for (std::size_t p = 0; p < per_image; ++p)
      for (std::size_t c = 0; c < 3; ++c) {
        const double d = img.pixels[p * 3 + c] - stats.mean[c];
        ss[c] += d * d;
      }
  for (std::size_t c = 0; c < 3; ++c) {
    stats.stddev[c] = std::sqrt(ss[c] / n);
    if (!(stats.stddev[c] > kDegenerateStd))
      throw ValidationError("degenerate channel " + std::to_string(c) + ": zero variance in training images");
  }
  stats.fitted_on = train_images.size();
  return stats;
}

Image standardize_image(const SpectroImage& img, const ChannelStats& stats) {
  for (double s : stats.stddev)
    if (!(s > 0.0)) throw ValidationError("channel stats have a non-positive std");
  Image out = img;
  for (std::size_t p = 0; p < img.height * img.width; ++p)
    for (std::size_t c = 0; c < 3; ++c)
      out.pixels[p * 3 + c] = (img.pixels[p * 3 + c] - stats.mean[c]) / stats.stddev[c];
  return out;
}

AugmentConfig AugmentConfig::identity() {
  AugmentConfig cfg;
  cfg.hflip_p = 0.0;
  cfg.vflip_p = 0.0;
  cfg.rotate_deg = 0.0;
  cfg.translate_frac = 0.0;
  cfg.scale_min = 1.0;
  cfg.scale_max = 1.0;
  cfg.brightness = 0.0;
  cfg.contrast = 0.0;
  cfg.blur_p = 0.0;
  return cfg;
}

SpectroImage flip_horizontal(const SpectroImage& img) {
  SpectroImage out(img.height, img.width);
  for (std::size_t h = 0; h < img.height; ++h)
    for (std::size_t w = 0; w < img.width; ++w)
      for (std::size_t c = 0; c < 3; ++c) out.at(h, w, c) = img.at(h, img.width - 1 - w, c);
  return out;
}

SpectroImage flip_vertical(const SpectroImage& img) {
  SpectroImage out(img.height, img.width);
  for (std::size_t h = 0; h < img.height; ++h)
    for (std::size_t w = 0; w < img.width; ++w)
      for (std::size_t c = 0; c < 3; ++c) out.at(h, w, c) = img.at(img.height - 1 - h, w, c);
  return out;
}

SpectroImage augment(const SpectroImage& img, const AugmentConfig& cfg, std::uint64_t seed) {
  Rng rng(seed);
  // Every random draw happens unconditionally so the stream layout does not
  // depend on which transforms fire.
  const double u_hflip = rng.uniform();
  const double u_vflip = rng.uniform();
  const double angle = rng.uniform(-cfg.rotate_deg, cfg.rotate_deg);
  const double tx = rng.uniform(-cfg.translate_frac, cfg.translate_frac) * static_cast<double>(img.width);
  const double ty = rng.uniform(-cfg.translate_frac, cfg.translate_frac) * static_cast<double>(img.height);
  const double scale = rng.uniform(cfg.scale_min, cfg.scale_max);
  const double bright = rng.uniform(std::max(0.0, 1.0 - cfg.brightness), 1.0 + cfg.brightness);
  const double contrast = rng.uniform(std::max(0.0, 1.0 - cfg.contrast), 1.0 + cfg.contrast);
  const double u_blur = rng.uniform();
  const double sigma = rng.uniform(cfg.blur_sigma_min, cfg.blur_sigma_max);

  SpectroImage out = img;
  if (u_hflip < cfg.hflip_p) out = flip_horizontal(out);
  if (u_vflip < cfg.vflip_p) out = flip_vertical(out);
  if (angle != 0.0 || tx != 0.0 || ty != 0.0 || scale != 1.0) out = affine(out, angle, tx, ty, scale);
  if (cfg.brightness > 0.0)
    for (double& v : out.pixels) v = clamp01(v * bright);
  if (cfg.contrast > 0.0) {
    double mean = 0.0;
    for (std::size_t p = 0; p < out.height * out.width; ++p)
      mean += 0.299 * out.pixels[p * 3] + 0.587 * out.pixels[p * 3 + 1] + 0.114 * out.pixels[p * 3 + 2];
    mean /= static_cast<double>(out.height * out.width);
    for (double& v : out.pixels) v = clamp01(contrast * v + (1.0 - contrast) * mean);
  }
  if (u_blur < cfg.blur_p && sigma > 0.0) out = gaussian_blur3(out, sigma);
  for (double& v : out.pixels) v = clamp01(v);
  return out;
}

const PercentileBounds& NormalizationSidecar::bounds_for(int device_id) const {
  if (!per_device) {
    if (bounds.size() != 1) throw ValidationError("global normalisation needs exactly one bounds entry");
    return bounds.front();
  }
  for (const auto& b : bounds)
    if (b.device_id == device_id) return b;
  throw ValidationError("no percentile bounds for device " + std::to_string(device_id));
}

void save_sidecar(const std::filesystem::path& path, const NormalizationSidecar& sidecar) {
  KeyValueConfig kv;
  kv.set("bounds.mode", sidecar.per_device ? "per_device" : "global");
  kv.set("bounds.count", std::to_string(sidecar.bounds.size()));
  for (std::size_t i = 0; i < sidecar.bounds.size(); ++i) {
    const auto& b = sidecar.bounds[i];
    const std::string p = "bounds." + std::to_string(i) + ".";
    kv.set(p + "device_id", std::to_string(b.device_id));
    kv.set(p + "v_min", format_double(b.v_min));
    kv.set(p + "v_max", format_double(b.v_max));
    kv.set(p + "fitted_on", std::to_string(b.fitted_on));
  }
  const auto& ch = sidecar.channels;
  kv.set("channel.mean", format_double(ch.mean[0]) + "," + format_double(ch.mean[1]) + "," +
                             format_double(ch.mean[2]));
  kv.set("channel.std", format_double(ch.stddev[0]) + "," + format_double(ch.stddev[1]) + "," +
                            format_double(ch.stddev[2]));
  kv.set("channel.fitted_on", std::to_string(ch.fitted_on));
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write sidecar " + path.string());
  kv.write(out);
}

NormalizationSidecar load_sidecar(const std::filesystem::path& path) {
  const auto kv = KeyValueConfig::load(path);
  NormalizationSidecar s;
  const auto mode = kv.get_string("bounds.mode", "per_device");
  if (mode != "per_device" && mode != "global") throw ValidationError("unknown bounds.mode " + mode);
  s.per_device = mode == "per_device";
  const auto count = kv.get_int("bounds.count", 0);
  for (std::int64_t i = 0; i < count; ++i) {
    const std::string p = "bounds." + std::to_string(i) + ".";
    PercentileBounds b;
    b.device_id = static_cast<int>(kv.get_int(p + "device_id", 0));
    b.v_min = kv.get_double(p + "v_min", 0.0);
    b.v_max = kv.get_double(p + "v_max", 0.0);
    b.fitted_on = static_cast<std::size_t>(kv.get_int(p + "fitted_on", 0));
    s.bounds.push_back(b);
  }
  const auto mean = kv.get_doubles("channel.mean", {});
  const auto sd = kv.get_doubles("channel.std", {});
  if (mean.size() != 3 || sd.size() != 3) throw ValidationError(path.string() + ": channel stats need 3 values");
  for (std::size_t c = 0; c < 3; ++c) {
    s.channels.mean[c] = mean[c];
    s.channels.stddev[c] = sd[c];
  }
  s.channels.fitted_on = static_cast<std::size_t>(kv.get_int("channel.fitted_on", 0));
  return s;
}

}  // namespace specvit
