#pragma once

#include <complex>
#include <cstddef>
#include <iosfwd>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "specvit/segmentation.hpp"

namespace specvit {

using ComplexMatrix = Eigen::MatrixXcd;

enum class Method { Stft, Cwt };

std::string_view to_string(Method m);
Method parse_method(std::string_view s);

inline constexpr double kDefaultEpsilon = 1e-12;
inline constexpr double kMorletCenterFrequency = 0.8125;
/// Morlet kernels are evaluated for |t| <= kMorletSupport only.
inline constexpr double kMorletSupport = 8.0;

/// STFT configuration. Window length and FFT size both equal the resolution;
/// packets are the sampling axis (fs = 1 cycle/packet).
class StftParams {
 public:
  explicit StftParams(std::size_t resolution, double frame_stride_frac = 0.5,
                      double epsilon = kDefaultEpsilon);

  std::size_t resolution() const noexcept { return resolution_; }
  std::size_t fft_size() const noexcept { return resolution_; }
  std::size_t hop() const noexcept { return hop_; }
  std::size_t bins() const noexcept { return resolution_ / 2 + 1; }
  double frame_stride_frac() const noexcept { return frame_stride_frac_; }
  double epsilon() const noexcept { return epsilon_; }
  /// Frames produced for a segment of the given length.
  std::size_t frames(std::size_t seg_len) const;
  /// f_k = k / R for k = 0..R/2.
  std::vector<double> frequency_axis() const;

 private:
  std::size_t resolution_;
  double frame_stride_frac_;
  std::size_t hop_;
  double epsilon_;
};

/// CWT configuration: `resolution` log-spaced pseudo-frequencies between
/// 1/(2R) and Nyquist, scales = f_c / f (largest scale first).
class CwtParams {
 public:
  explicit CwtParams(std::size_t resolution, double center_freq = kMorletCenterFrequency,
                     double epsilon = kDefaultEpsilon);

  std::size_t resolution() const noexcept { return scales_.size(); }
  double center_freq() const noexcept { return center_freq_; }
  double f_min() const noexcept { return f_min_; }
  double f_max() const noexcept { return f_max_; }
  double epsilon() const noexcept { return epsilon_; }
  const std::vector<double>& scales() const noexcept { return scales_; }
  const std::vector<double>& freqs() const noexcept { return freqs_; }

 private:
  double center_freq_;
  double f_min_;
  double f_max_;
  double epsilon_;
  std::vector<double> freqs_;
  std::vector<double> scales_;
};

/// dB power matrix. STFT: frames x bins. CWT: scales x samples.
struct Spectrogram {
  Method method = Method::Stft;
  Eigen::MatrixXd power_db;
  std::vector<double> time_axis;  // packets (frame centre for STFT)
  std::vector<double> freq_axis;  // cycles/packet, ascending in matrix order
  int device_id = 0;
  std::size_t segment_index = 0;
};

/// Symmetric Hann window, w[n] = 0.5 (1 - cos(2 pi n / (R - 1))).
std::vector<double> hann_window(std::size_t length);

/// Complex Morlet, pi^(-1/4) exp(j 2 pi f_c t) exp(-t^2 / 2).
std::complex<double> morlet(double t, double center_freq);

ComplexMatrix stft(const Segment& segment, const StftParams& params);
ComplexMatrix cwt(const Segment& segment, const CwtParams& params);

/// 10 log10(|c|^2 + eps), elementwise.
Eigen::MatrixXd power_db(const ComplexMatrix& coeffs, double epsilon);

/// Method-agnostic transform settings, as carried by experiment configs.
struct TransformSpec {
  Method method = Method::Stft;
  std::size_t resolution = 16;
  double frame_stride_frac = 0.5;
  double center_freq = kMorletCenterFrequency;
  double epsilon = kDefaultEpsilon;
};

Spectrogram compute_spectrogram(const Segment& centered, const TransformSpec& spec);

/// Rows ordered by ascending frequency, columns by time. This is the
/// orientation images are rendered in.
Eigen::MatrixXd frequency_major(const Spectrogram& spec);

/// CSV with a one-line axis header; rows follow the matrix order (time frame
/// for STFT, scale for CWT) and start with their axis value.
void write_spectrogram_csv(std::ostream& out, const Spectrogram& spec);

}  // namespace specvit
