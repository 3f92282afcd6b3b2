#include <benchmark/benchmark.h>

#include "specvit/rng.hpp"
#include "specvit/spectral.hpp"

namespace {

specvit::Segment centered_noise(std::size_t n) {
  specvit::Rng rng(n);
  specvit::Segment s;
  s.values.resize(n);
  for (auto& v : s.values) v = rng.uniform(43.0, 1500.0);
  return specvit::mean_center(std::move(s));
}

void BM_Stft(benchmark::State& state) {
  const auto seg = centered_noise(static_cast<std::size_t>(state.range(0)));
  const specvit::StftParams params(static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(specvit::stft(seg, params));
}
BENCHMARK(BM_Stft)->ArgsProduct({{100, 500}, {16, 32, 64}});

// Non power-of-two resolution falls back to the table DFT.
BENCHMARK(BM_Stft)->Args({100, 24});

void BM_Cwt(benchmark::State& state) {
  const auto seg = centered_noise(static_cast<std::size_t>(state.range(0)));
  const specvit::CwtParams params(static_cast<std::size_t>(state.range(1)));
  for (auto _ : state) benchmark::DoNotOptimize(specvit::cwt(seg, params));
}
BENCHMARK(BM_Cwt)->ArgsProduct({{100, 200, 500}, {16, 64}})->Unit(benchmark::kMicrosecond);

}  // namespace
