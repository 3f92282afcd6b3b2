#include <gtest/gtest.h>

#include <complex>
#include <numbers>
#include <sstream>

#include "specvit/errors.hpp"
#include "specvit/spectral.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace specvit;
using namespace specvit::testing;

TEST(Hann, Values) {
  const auto w4 = hann_window(4);
  ASSERT_EQ(w4.size(), 4u);
  EXPECT_NEAR(w4[0], 0.0, 1e-15);
  EXPECT_NEAR(w4[1], 0.75, 1e-15);
  EXPECT_NEAR(w4[2], 0.75, 1e-15);
  EXPECT_NEAR(w4[3], 0.0, 1e-15);
  for (std::size_t R : {5u, 9u, 17u}) EXPECT_NEAR(hann_window(R)[(R - 1) / 2], 1.0, 1e-15);
  for (std::size_t R = 2; R < 70; ++R) {
    const auto w = hann_window(R);
    for (std::size_t n = 0; n < R; ++n) EXPECT_NEAR(w[n], w[R - 1 - n], 1e-15);
  }
  EXPECT_THROW(hann_window(1), ValidationError);
}

TEST(StftParams, FramesAndAxes) {
  const StftParams p(16);
  EXPECT_EQ(p.hop(), 8u);
  EXPECT_EQ(p.bins(), 9u);
  EXPECT_EQ(p.frames(100), 11u);
  for (std::size_t R : {16u, 32u, 64u}) {
    const auto f = StftParams(R).frequency_axis();
    ASSERT_EQ(f.size(), R / 2 + 1);
    for (std::size_t k = 1; k < f.size(); ++k) EXPECT_EQ(f[k] - f[k - 1], 1.0 / static_cast<double>(R));
  }
}

TEST(Stft, ZeroSegment) {
  const auto seg = centered_segment(std::vector<double>(100, 5.0));
  const auto c = stft(seg, StftParams(16));
  EXPECT_EQ(c.rows(), 11);
  EXPECT_EQ(c.cols(), 9);
  EXPECT_EQ(c.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Stft, MatchesNaiveDft) {
  Rng rng(17);
  for (std::size_t R : {16u, 24u, 32u, 64u}) {
    for (int trial = 0; trial < 10; ++trial) {
      const auto seg = random_segment(rng, 100);
      const StftParams p(R);
      EXPECT_LE(max_rel_error(stft(seg, p), naive_stft(seg.values, R, p.hop())), 1e-9) << "R=" << R;
    }
  }
}

TEST(Stft, CosineArgmaxAtBin) {
  std::vector<double> v(100);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 300.0 + 80.0 * std::cos(2.0 * kPi * 2.0 / 16.0 * i);
  const auto c = stft(centered_segment(v), StftParams(16));
  for (Eigen::Index m = 0; m < c.rows(); ++m) {
    Eigen::Index k;
    c.row(m).cwiseAbs().maxCoeff(&k);
    EXPECT_EQ(k, 2);
  }
}

TEST(Stft, ShortSegment) {
  Rng rng(1);
  try {
    stft(random_segment(rng, 15), StftParams(16));
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("segment shorter than window"), std::string::npos);
  }
}

TEST(Stft, RequiresCenteredSegment) {
  Segment raw;
  raw.values.assign(100, 1.0);
  EXPECT_THROW(stft(raw, StftParams(16)), ValidationError);
}

TEST(Stft, ShiftByHopShiftsFrames) {
  Rng rng(33);
  const auto seg = random_segment(rng, 200);
  const StftParams p(16);
  Segment shifted = seg;
  shifted.values.erase(shifted.values.begin(), shifted.values.begin() + static_cast<long>(p.hop()));
  const auto a = stft(seg, p);
  const auto b = stft(shifted, p);
  for (Eigen::Index m = 0; m < b.rows(); ++m)
    for (Eigen::Index k = 0; k < b.cols(); ++k)
      EXPECT_LE(std::abs(b(m, k) - a(m + 1, k)), 1e-9 * std::max(1.0, std::abs(a(m + 1, k))));
}

TEST(Morlet, Closed) {
  EXPECT_NEAR(morlet(0.0, 0.8125).real(), std::pow(kPi, -0.25), 1e-15);
  EXPECT_NEAR(morlet(0.0, 0.8125).real(), 0.7511, 1e-4);
  EXPECT_EQ(morlet(0.0, 0.8125).imag(), 0.0);
  for (double t : {-3.0, -1.2, 0.4, 2.5}) {
    const double env = std::pow(kPi, -0.25) * std::exp(-t * t / 2.0);
    EXPECT_NEAR(std::abs(morlet(t, 0.8125)), env, 1e-15);
    EXPECT_NEAR(std::abs(morlet(t, 3.0)), env, 1e-15);
    EXPECT_NEAR(std::abs(morlet(-t, 0.8125)), env, 1e-15);
  }
}

TEST(CwtParams, ScaleLaw) {
  for (std::size_t R : {2u, 8u, 16u, 32u, 64u, 100u}) {
    const CwtParams p(R);
    ASSERT_EQ(p.scales().size(), R);
    EXPECT_EQ(p.f_min(), 1.0 / (2.0 * static_cast<double>(R)));
    EXPECT_EQ(p.freqs().back(), 0.5);
    EXPECT_EQ(p.scales().back(), 1.625);
    for (std::size_t i = 0; i < R; ++i) {
      EXPECT_EQ(p.scales()[i] * p.freqs()[i], 0.8125);
      if (i > 0) {
        EXPECT_GT(p.freqs()[i], p.freqs()[i - 1]);
        EXPECT_LT(p.scales()[i], p.scales()[i - 1]);
      }
      const double expect = p.f_min() * std::pow(p.f_max() / p.f_min(), static_cast<double>(i) / (R - 1.0));
      EXPECT_NEAR(p.freqs()[i], expect, 1e-14);
    }
  }
}

// Some resolutions put a frequency in a run of ulps with no exact
// (frequency, scale) pair; the snap has to search past it.
TEST(CwtParams, ScaleLawEveryResolution) {
  for (std::size_t R = 2; R <= 300; ++R) {
    const CwtParams p(R);
    for (std::size_t i = 0; i < R; ++i) {
      ASSERT_EQ(p.scales()[i] * p.freqs()[i], 0.8125) << "R=" << R << " i=" << i;
      const double expect = p.f_min() * std::pow(p.f_max() / p.f_min(), static_cast<double>(i) / (R - 1.0));
      ASSERT_NEAR(p.freqs()[i] / expect, 1.0, 1e-11) << "R=" << R << " i=" << i;
    }
  }
}

TEST(Cwt, MatchesDenseConvolution) {
  Rng rng(5);
  for (int trial = 0; trial < 8; ++trial) {
    const auto seg = random_segment(rng, 20 + rng.below(181));
    const CwtParams p(16);
    EXPECT_LE(max_rel_error(cwt(seg, p), dense_cwt(seg.values, p.scales(), p.center_freq())), 1e-9);
  }
}

TEST(Cwt, ZeroAndLinearity) {
  const CwtParams p(16);
  const auto zero = cwt(centered_segment(std::vector<double>(64, 9.0)), p);
  EXPECT_EQ(zero.rows(), 16);
  EXPECT_EQ(zero.cols(), 64);
  EXPECT_EQ(zero.cwiseAbs().maxCoeff(), 0.0);

  Rng rng(6);
  const auto seg = random_segment(rng, 80);
  Segment scaled = seg;
  for (double& v : scaled.values) v *= -3.5;
  EXPECT_LE((cwt(scaled, p) - (-3.5) * cwt(seg, p)).cwiseAbs().maxCoeff(),
            1e-12 * cwt(seg, p).cwiseAbs().maxCoeff() * 3.5);
}

TEST(Cwt, SinusoidPeaksAtItsRow) {
  const CwtParams p(16);
  for (std::size_t j0 = 3; j0 < 15; ++j0) {
    std::vector<double> v(200);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = std::sin(2.0 * kPi * p.freqs()[j0] * static_cast<double>(i));
    const auto seg = centered_segment(v);
    const auto mean_mag = dense_cwt(seg.values, p.scales(), p.center_freq()).cwiseAbs().rowwise().mean().eval();
    Eigen::Index oracle_row;
    mean_mag.maxCoeff(&oracle_row);
    Eigen::Index row;
    cwt(seg, p).cwiseAbs().rowwise().mean().maxCoeff(&row);
    EXPECT_EQ(row, oracle_row);
    EXPECT_LE(std::abs(static_cast<long>(row) - static_cast<long>(j0)), 1) << "j0=" << j0;
  }
}

TEST(PowerDb, Values) {
  ComplexMatrix c(1, 3);
  c << 0.0, std::complex<double>(0.6, 0.8), 10.0;
  const auto db = power_db(c, 1e-12);
  EXPECT_EQ(db(0, 0), -120.0);
  EXPECT_NEAR(db(0, 1), 0.0, 1e-11);
  EXPECT_NEAR(db(0, 2), 20.0, 1e-12);
}

TEST(Spectrogram, ShapesAxesAndFloor) {
  Rng rng(12);
  const auto seg = random_segment(rng, 100);
  const auto s = compute_spectrogram(seg, TransformSpec{Method::Stft, 16});
  EXPECT_EQ(s.power_db.rows(), 11);
  EXPECT_EQ(s.power_db.cols(), 9);
  EXPECT_EQ(s.time_axis.size(), 11u);
  EXPECT_EQ(s.freq_axis.size(), 9u);
  EXPECT_GE(s.power_db.minCoeff(), -120.0);

  TransformSpec cw;
  cw.method = Method::Cwt;
  const auto c = compute_spectrogram(seg, cw);
  EXPECT_EQ(c.power_db.rows(), 16);
  EXPECT_EQ(c.power_db.cols(), 100);
  EXPECT_GE(c.power_db.minCoeff(), -120.0);

  const auto fm = frequency_major(s);
  EXPECT_EQ(fm.rows(), 9);
  EXPECT_EQ(fm.cols(), 11);
  EXPECT_EQ(fm(3, 4), s.power_db(4, 3));
  EXPECT_EQ(frequency_major(c), c.power_db);
}

TEST(Spectrogram, CsvHeaderAndRows) {
  Rng rng(12);
  const auto s = compute_spectrogram(random_segment(rng, 40), TransformSpec{Method::Stft, 16});
  std::ostringstream out;
  write_spectrogram_csv(out, s);
  std::istringstream in(out.str());
  std::string line;
  std::size_t rows = 0;
  std::getline(in, line);
  EXPECT_EQ(line.rfind("time", 0), 0u);
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, static_cast<std::size_t>(s.power_db.rows()));
}

TEST(Method, ParseRoundTrip) {
  EXPECT_EQ(parse_method("STFT"), Method::Stft);
  EXPECT_EQ(parse_method(to_string(Method::Cwt)), Method::Cwt);
  EXPECT_THROW(parse_method("dwt"), ValidationError);
}
