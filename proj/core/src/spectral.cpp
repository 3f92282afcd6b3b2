#include "specvit/spectral.hpp"

#include <bit>
#include <cmath>
#include <limits>
#include <numbers>
#include <tuple>
#include <ostream>

#include "specvit/config.hpp"
#include "specvit/errors.hpp"

namespace specvit {
namespace {

using cd = std::complex<double>;

/// Twiddles exp(-j 2 pi k / n) for k < n, evaluated directly rather than by
/// recurrence so error does not accumulate with k.
std::vector<cd> twiddles(std::size_t n) {
  std::vector<cd> w(n);
  for (std::size_t k = 0; k < n; ++k)
    w[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  return w;
}

/// In-place iterative radix-2 FFT; n must be a power of two.
void fft_pow2(std::vector<cd>& a, const std::vector<cd>& tw) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cd u = a[i + k];
        const cd v = a[i + k + len / 2] * tw[k * step];
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

/// Nearest double to `f` (within a few ulps) for which (c / f) * f == c
/// holds exactly, so each scale/frequency pair multiplies back to the
/// centre frequency without rounding residue.
// Nudges f (by ulps) and the scale c / f (by at most one ulp) until the double
// product scale * f is exactly c. Returns {f, scale}. Some frequencies sit in
// runs of a few thousand ulps with no exact pair, hence the wide search; the
// shift stays below 1e-10 relative.
std::pair<double, double> snap_to_exact_product(double f, double c) {
  const auto try_scale = [c](double freq, double& scale) {
    const double q = c / freq;
    for (double s : {q, std::nextafter(q, 0.0), std::nextafter(q, std::numeric_limits<double>::infinity())})
      if (s * freq == c) {
        scale = s;
        return true;
      }
    return false;
  };
  double up = f, down = f, scale = 0.0;
  for (int k = 0; k < (1 << 20); ++k) {
    if (try_scale(up, scale)) return {up, scale};
    if (try_scale(down, scale)) return {down, scale};
    up = std::nextafter(up, std::numeric_limits<double>::infinity());
    down = std::nextafter(down, 0.0);
  }
  return {f, c / f};
}

void require_centered(const Segment& s) {
  if (!s.centered) throw ValidationError("spectral transforms require a mean-centered segment");
}

}  // namespace

std::string_view to_string(Method m) { return m == Method::Stft ? "STFT" : "CWT"; }

Method parse_method(std::string_view s) {
  if (s == "STFT" || s == "stft") return Method::Stft;
  if (s == "CWT" || s == "cwt") return Method::Cwt;
  throw ValidationError("unknown transform method '" + std::string(s) + "'");
}

StftParams::StftParams(std::size_t resolution, double frame_stride_frac, double epsilon)
    : resolution_(resolution), frame_stride_frac_(frame_stride_frac), epsilon_(epsilon) {
  if (resolution < 2) throw ValidationError("STFT resolution must be >= 2");
  if (!(frame_stride_frac > 0.0 && frame_stride_frac <= 1.0))
    throw ValidationError("frame stride fraction must lie in (0, 1]");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  hop_ = static_cast<std::size_t>(std::floor(static_cast<double>(resolution) * frame_stride_frac));
  if (hop_ < 1) throw ValidationError("STFT hop rounds to zero");
}

std::size_t StftParams::frames(std::size_t seg_len) const {
  if (seg_len < resolution_) return 0;
  return (seg_len - resolution_) / hop_ + 1;
}

std::vector<double> StftParams::frequency_axis() const {
  std::vector<double> f(bins());
  for (std::size_t k = 0; k < f.size(); ++k)
    f[k] = static_cast<double>(k) / static_cast<double>(resolution_);
  return f;
}

CwtParams::CwtParams(std::size_t resolution, double center_freq, double epsilon)
    : center_freq_(center_freq), epsilon_(epsilon) {
  if (resolution < 2) throw ValidationError("CWT resolution must be >= 2");
  if (!(center_freq > 0.0)) throw ValidationError("Morlet centre frequency must be > 0");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  f_min_ = 1.0 / (2.0 * static_cast<double>(resolution));
  f_max_ = 0.5;
  freqs_.resize(resolution);
  scales_.resize(resolution);
  const double ratio = f_max_ / f_min_;
  for (std::size_t i = 0; i < resolution; ++i) {
    const double e = static_cast<double>(i) / static_cast<double>(resolution - 1);
    const double f = i + 1 == resolution ? f_max_ : f_min_ * std::pow(ratio, e);
    std::tie(freqs_[i], scales_[i]) = snap_to_exact_product(f, center_freq_);
  }
}

std::vector<double> hann_window(std::size_t length) {
  if (length < 2) throw ValidationError("Hann window length must be >= 2");
  std::vector<double> w(length);
  const double denom = static_cast<double>(length - 1);
  for (std::size_t n = 0; n < length; ++n)
    w[n] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * static_cast<double>(n) / denom));
  return w;
}

std::complex<double> morlet(double t, double center_freq) {
  static const double norm = std::pow(std::numbers::pi, -0.25);
  return norm * std::exp(-0.5 * t * t) * std::polar(1.0, 2.0 * std::numbers::pi * center_freq * t);
}

ComplexMatrix stft(const Segment& segment, const StftParams& params) {
  require_centered(segment);
  const std::size_t len = segment.values.size();
  const std::size_t r = params.resolution();
  if (len < r) throw ValidationError("segment shorter than window");

  const auto window = hann_window(r);
  const std::size_t frames = params.frames(len);
  const std::size_t bins = params.bins();
  ComplexMatrix out(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));

  const auto tw = twiddles(r);
  const bool pow2 = std::has_single_bit(r);
  std::vector<cd> buf(r);
  for (std::size_t m = 0; m < frames; ++m) {
    const double* x = segment.values.data() + m * params.hop();
    if (pow2) {
      for (std::size_t n = 0; n < r; ++n) buf[n] = x[n] * window[n];
      fft_pow2(buf, tw);
      for (std::size_t k = 0; k < bins; ++k)
        out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = buf[k];
    } else {
      for (std::size_t k = 0; k < bins; ++k) {
        cd acc{};
        for (std::size_t n = 0; n < r; ++n) acc += x[n] * window[n] * tw[(k * n) % r];
        out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = acc;
      }
    }
  }
  return out;
}

ComplexMatrix cwt(const Segment& segment, const CwtParams& params) {
  require_centered(segment);
  const auto len = static_cast<std::ptrdiff_t>(segment.values.size());
  const auto& scales = params.scales();
  ComplexMatrix out(static_cast<Eigen::Index>(scales.size()), static_cast<Eigen::Index>(len));

  std::vector<cd> kernel;
  for (std::size_t j = 0; j < scales.size(); ++j) {
    const double s = scales[j];
    // Offsets d = n' - n with |d / s| <= support; also bounded by the segment.
    const auto half = std::min<std::ptrdiff_t>(
        static_cast<std::ptrdiff_t>(std::floor(kMorletSupport * s)), len - 1);
    kernel.resize(static_cast<std::size_t>(2 * half + 1));
    for (std::ptrdiff_t d = -half; d <= half; ++d)
      kernel[static_cast<std::size_t>(d + half)] =
          std::conj(morlet(static_cast<double>(d) / s, params.center_freq()));
    const double gain = 1.0 / std::sqrt(s);

    for (std::ptrdiff_t n = 0; n < len; ++n) {
      const auto lo = std::max<std::ptrdiff_t>(0, n - half);
      const auto hi = std::min<std::ptrdiff_t>(len - 1, n + half);
      cd acc{};
      for (std::ptrdiff_t np = lo; np <= hi; ++np)
        acc += segment.values[static_cast<std::size_t>(np)] *
               kernel[static_cast<std::size_t>(np - n + half)];
      out(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(n)) = gain * acc;
    }
  }
  return out;
}

Eigen::MatrixXd power_db(const ComplexMatrix& coeffs, double epsilon) {
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  return coeffs.unaryExpr([epsilon](const cd& c) { return 10.0 * std::log10(std::norm(c) + epsilon); });
}

Spectrogram compute_spectrogram(const Segment& centered, const TransformSpec& spec) {
  Spectrogram out;
  out.method = spec.method;
  out.device_id = centered.device_id;
  out.segment_index = centered.segment_index;
  if (spec.method == Method::Stft) {
    const StftParams params(spec.resolution, spec.frame_stride_frac, spec.epsilon);
    out.power_db = power_db(stft(centered, params), params.epsilon());
    out.freq_axis = params.frequency_axis();
    out.time_axis.resize(static_cast<std::size_t>(out.power_db.rows()));
    for (std::size_t m = 0; m < out.time_axis.size(); ++m)
      out.time_axis[m] = static_cast<double>(m * params.hop()) +
                         0.5 * static_cast<double>(params.resolution() - 1);
  } else {
    const CwtParams params(spec.resolution, spec.center_freq, spec.epsilon);
    out.power_db = power_db(cwt(centered, params), params.epsilon());
    out.freq_axis = params.freqs();
    out.time_axis.resize(centered.values.size());
    for (std::size_t n = 0; n < out.time_axis.size(); ++n) out.time_axis[n] = static_cast<double>(n);
  }
  return out;
}

Eigen::MatrixXd frequency_major(const Spectrogram& spec) {
  if (spec.method == Method::Stft) return spec.power_db.transpose();
  return spec.power_db;
}

void write_spectrogram_csv(std::ostream& out, const Spectrogram& spec) {
  const bool is_stft = spec.method == Method::Stft;
  const auto& row_axis = is_stft ? spec.time_axis : spec.freq_axis;
  const auto& col_axis = is_stft ? spec.freq_axis : spec.time_axis;
  out << (is_stft ? "time\\freq" : "freq\\time");
  for (double c : col_axis) out << ',' << format_double(c);
  out << '\n';
  for (Eigen::Index i = 0; i < spec.power_db.rows(); ++i) {
    out << format_double(row_axis[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < spec.power_db.cols(); ++j)
      out << ',' << format_double(spec.power_db(i, j));
    out << '\n';
  }
}

}  // namespace specvit
