#include <benchmark/benchmark.h>

#include <vector>

#include "specvit/rng.hpp"
#include "specvit/vit.hpp"

namespace {

specvit::VitConfig tiny(std::size_t image, std::size_t patch) {
  specvit::VitConfig cfg;
  cfg.image_size = image;
  cfg.patch_size = patch;
  cfg.embed_dim = 32;
  cfg.num_layers = 2;
  cfg.num_heads = 2;
  cfg.mlp_dim = 64;
  cfg.num_classes = 4;
  return cfg;
}

std::vector<specvit::Image> noise_images(std::size_t count, std::size_t size) {
  specvit::Rng rng(11);
  std::vector<specvit::Image> out(count, specvit::Image(size, size));
  for (auto& img : out)
    for (auto& p : img.pixels) p = rng.normal();
  return out;
}

void BM_VitForward(benchmark::State& state) {
  const auto cfg = tiny(64, static_cast<std::size_t>(state.range(0)));
  const auto model = specvit::init_model(cfg, 1);
  const auto images = noise_images(1, cfg.image_size);
  for (auto _ : state) benchmark::DoNotOptimize(specvit::forward(images[0], model));
}
BENCHMARK(BM_VitForward)->Arg(16)->Arg(8)->Unit(benchmark::kMicrosecond);

void BM_VitBackwardBatch16(benchmark::State& state) {
  const auto cfg = tiny(64, static_cast<std::size_t>(state.range(0)));
  const auto model = specvit::init_model(cfg, 1);
  const auto images = noise_images(16, cfg.image_size);
  std::vector<int> labels(16);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 4);
  for (auto _ : state) benchmark::DoNotOptimize(specvit::backward(model, images, labels, 0.1));
}
BENCHMARK(BM_VitBackwardBatch16)->Arg(16)->Arg(8)->Unit(benchmark::kMillisecond);

}  // namespace
