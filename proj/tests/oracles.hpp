#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "specvit/spectral.hpp"

// Independent reference transforms written straight from the definitions.
namespace specvit::testing {


inline constexpr double kPi = std::numbers::pi;

// Triple loop straight from the definition.
inline ComplexMatrix naive_stft(const std::vector<double>& p, std::size_t R, std::size_t hop) {
  const std::size_t T = (p.size() - R) / hop + 1;
  ComplexMatrix out(static_cast<Eigen::Index>(T), static_cast<Eigen::Index>(R / 2 + 1));
  for (std::size_t m = 0; m < T; ++m)
    for (std::size_t k = 0; k <= R / 2; ++k) {
      std::complex<double> acc;
      for (std::size_t n = 0; n < R; ++n) {
        const double w = 0.5 * (1.0 - std::cos(2.0 * kPi * static_cast<double>(n) / static_cast<double>(R - 1)));
        acc += p[m * hop + n] * w *
               std::exp(std::complex<double>(0.0, -2.0 * kPi * static_cast<double>(k * n) / static_cast<double>(R)));
      }
      out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = acc;
    }
  return out;
}

// Dense direct convolution over every (scale, sample) pair.
inline ComplexMatrix dense_cwt(const std::vector<double>& p, const std::vector<double>& scales, double fc) {
  const auto L = static_cast<Eigen::Index>(p.size());
  ComplexMatrix out(static_cast<Eigen::Index>(scales.size()), L);
  for (std::size_t j = 0; j < scales.size(); ++j) {
    const double s = scales[j];
    for (Eigen::Index n = 0; n < L; ++n) {
      std::complex<double> acc;
      for (Eigen::Index np = 0; np < L; ++np) {
        const double t = static_cast<double>(np - n) / s;
        if (std::abs(t) > 8.0) continue;
        const auto psi = std::pow(kPi, -0.25) * std::exp(std::complex<double>(0.0, 2.0 * kPi * fc * t)) *
                         std::exp(-t * t / 2.0);
        acc += p[static_cast<std::size_t>(np)] * std::conj(psi);
      }
      out(static_cast<Eigen::Index>(j), n) = acc / std::sqrt(s);
    }
  }
  return out;
}

inline double max_rel_error(const ComplexMatrix& got, const ComplexMatrix& want) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < want.size(); ++i) {
    const double ref = std::abs(want(i));
    const double err = std::abs(got(i) - want(i));
    worst = std::max(worst, ref > 0.0 ? err / ref : err);
  }
  return worst;
}

}  // namespace specvit::testing
