#include <gtest/gtest.h>

#include <algorithm>
#include <complex>
#include <numbers>
#include <sstream>

#include "specvit/errors.hpp"
#include "specvit/spectral.hpp"
#include "specvit/synth.hpp"
#include "test_util.hpp"

using namespace specvit;

TEST(Synth, DegenerateProfileIsConstant) {
  SynthProfile p;
  p.base_bytes = 100;
  const auto t = generate_trace(p, 500, 0);
  EXPECT_TRUE(std::all_of(t.lengths.begin(), t.lengths.end(), [](auto v) { return v == 100; }));
}

TEST(Synth, SameSeedIsByteIdentical) {
  SynthProfile p;
  p.periodic_components = {{0.1, 80.0}, {0.33, 20.0}};
  p.noise_std = 30.0;
  p.burst_prob = 0.05;
  p.burst_bytes = 900;
  p.seed = 42;
  std::ostringstream a, b;
  const std::vector<PacketTrace> ta{generate_trace(p, 2000, 0)}, tb{generate_trace(p, 2000, 0)};
  write_traces(a, ta);
  write_traces(b, tb);
  EXPECT_EQ(a.str(), b.str());

  p.seed = 43;
  EXPECT_NE(generate_trace(p, 2000, 0).lengths, ta[0].lengths);
}

TEST(Synth, LengthsClampedToPhysicalRange) {
  SynthProfile p;
  p.base_bytes = 700;
  p.periodic_components = {{0.2, 1200.0}};
  p.noise_std = 400.0;
  p.burst_prob = 0.3;
  p.burst_bytes = 1400;
  p.seed = 1;
  const auto t = generate_trace(p, 5000, 0);
  const auto [lo, hi] = std::minmax_element(t.lengths.begin(), t.lengths.end());
  EXPECT_EQ(*lo, kMinPacketBytes);
  EXPECT_EQ(*hi, kMaxPacketBytes);
}

TEST(Synth, FrequencyAboveNyquistRejected) {
  SynthProfile p;
  p.periodic_components = {{0.51, 10.0}};
  EXPECT_THROW(generate_trace(p, 10, 0), ValidationError);
}

// Brute-force DFT of each Hann-windowed frame, independent of stft().
TEST(Synth, ToneLandsInNearestBin) {
  SynthProfile p;
  p.base_bytes = 500;
  p.periodic_components = {{0.125, 50.0}};
  const auto t = generate_trace(p, 100, 0);
  std::vector<double> v(t.lengths.begin(), t.lengths.end());
  const auto seg = specvit::testing::centered_segment(v);

  const std::size_t R = 16, hop = 8;
  for (std::size_t start = 0; start + R <= seg.values.size(); start += hop) {
    std::size_t best = 0;
    double best_pow = -1.0;
    for (std::size_t k = 0; k <= R / 2; ++k) {
      std::complex<double> acc;
      for (std::size_t n = 0; n < R; ++n) {
        const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * n / (R - 1)));
        acc += seg.values[start + n] * w * std::polar(1.0, -2.0 * std::numbers::pi * k * n / R);
      }
      if (std::norm(acc) > best_pow) {
        best_pow = std::norm(acc);
        best = k;
      }
    }
    EXPECT_EQ(best, 2u) << "frame at " << start;
  }

  const auto spec = compute_spectrogram(seg, TransformSpec{});
  for (Eigen::Index m = 0; m < spec.power_db.rows(); ++m) {
    Eigen::Index k;
    spec.power_db.row(m).maxCoeff(&k);
    EXPECT_EQ(k, 2);
  }
}

TEST(Synth, ProfilesFromConfig) {
  KeyValueConfig cfg;
  cfg.set("device.0.name", "plug");
  cfg.set("device.0.components", "0.05:120,0.2:10");
  cfg.set("device.0.noise_std", "12.5");
  cfg.set("device.1.base_bytes", "800");
  const auto profiles = profiles_from_config(cfg);
  ASSERT_EQ(profiles.size(), 2u);
  EXPECT_EQ(profiles[0].name, "plug");
  ASSERT_EQ(profiles[0].periodic_components.size(), 2u);
  EXPECT_DOUBLE_EQ(profiles[0].periodic_components[1].frequency, 0.2);
  EXPECT_DOUBLE_EQ(profiles[0].noise_std, 12.5);
  EXPECT_EQ(profiles[1].base_bytes, 800);

  cfg.set("device.3.base_bytes", "1");
  EXPECT_THROW(profiles_from_config(cfg), ValidationError);
}
