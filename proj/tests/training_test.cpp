#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "gradcheck.hpp"
#include "specvit/errors.hpp"
#include "specvit/training.hpp"

using namespace specvit;

namespace {

std::vector<int> devices(std::size_t per_device, int count) {
  std::vector<int> out;
  for (int d = 0; d < count; ++d) out.insert(out.end(), per_device, d);
  return out;
}

VitConfig tiny_config(std::size_t classes) {
  VitConfig c;
  c.image_size = 16;
  c.patch_size = 8;
  c.embed_dim = 8;
  c.num_layers = 1;
  c.num_heads = 2;
  c.mlp_dim = 16;
  c.num_classes = classes;
  return c;
}

// Two classes: horizontal vs vertical stripes, plus noise. Every patch carries
// the class, so a model can solve it without position embeddings.
LabeledImages stripes(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  LabeledImages out;
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    SpectroImage img(16, 16);
    for (std::size_t h = 0; h < 16; ++h)
      for (std::size_t w = 0; w < 16; ++w) {
        const bool lit = (label == 0 ? h : w) % 2 == 0;
        const double v = std::clamp((lit ? 0.8 : 0.2) + 0.1 * rng.normal(), 0.0, 1.0);
        for (std::size_t c = 0; c < 3; ++c) img.at(h, w, c) = v;
      }
    out.images.push_back(std::move(img));
    out.labels.push_back(label);
  }
  return out;
}

TrainConfig quick_config() {
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.max_epochs = 6;
  cfg.patience = 6;
  cfg.peak_lr = 3e-3;
  cfg.augment = false;
  cfg.seed = 5;
  return cfg;
}

}  // namespace

TEST(Split, TableCounts) {
  const auto dev = devices(560, 3);
  const auto s = split_dataset(dev, SplitSpec{});
  for (int d = 0; d < 3; ++d) {
    const auto count = [&](const std::vector<std::size_t>& idx) {
      return std::count_if(idx.begin(), idx.end(), [&](std::size_t i) { return dev[i] == d; });
    };
    EXPECT_EQ(count(s.train), 400);
    EXPECT_EQ(count(s.val), 80);
    EXPECT_EQ(count(s.test), 80);
  }
}

TEST(Split, PartitionAndDeterminism) {
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> dev;
    for (int d = 0; d < 4; ++d) dev.insert(dev.end(), 7 + rng.below(60), d);
    rng.shuffle(dev.begin(), dev.end());
    SplitSpec spec;
    spec.seed = rng.next();
    const auto a = split_dataset(dev, spec);
    const auto b = split_dataset(dev, spec);
    EXPECT_EQ(a.train, b.train);
    EXPECT_EQ(a.val, b.val);
    EXPECT_EQ(a.test, b.test);
    std::multiset<std::size_t> all(a.train.begin(), a.train.end());
    all.insert(a.val.begin(), a.val.end());
    all.insert(a.test.begin(), a.test.end());
    ASSERT_EQ(all.size(), dev.size());
    for (std::size_t i = 0; i < dev.size(); ++i) ASSERT_EQ(all.count(i), 1u);
  }
}

TEST(Split, SeedChangesPartition) {
  const auto dev = devices(70, 2);
  SplitSpec a, b;
  a.seed = 1;
  b.seed = 2;
  EXPECT_NE(split_dataset(dev, a).test, split_dataset(dev, b).test);
}

TEST(Split, TooFewImagesNamesDevice) {
  auto dev = devices(20, 2);
  dev.insert(dev.end(), 6, 2);
  try {
    split_dataset(dev, SplitSpec{});
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("device 2"), std::string::npos);
  }
}

TEST(Split, CsvRoundTrip) {
  const auto dev = devices(30, 3);
  const auto s = split_dataset(dev, SplitSpec{});
  std::ostringstream out;
  write_split_csv(out, dev, s);
  std::istringstream in(out.str());
  const auto back = read_split_csv(in, dev.size());
  EXPECT_EQ(back.train, s.train);
  EXPECT_EQ(back.val, s.val);
  EXPECT_EQ(back.test, s.test);
  EXPECT_EQ(out.str().substr(0, 27), "device_id,image_index,split");
}

TEST(Schedule, OneCycleValues) {
  // total 101 steps puts the warm-up end exactly on step 30.
  EXPECT_DOUBLE_EQ(lr_at(30, 101, 1e-4), 1e-4);
  EXPECT_DOUBLE_EQ(lr_at(0, 101, 1e-4), 4e-6);
  EXPECT_NEAR(lr_at(100, 101, 1e-4), 1e-8, 1e-20);
  EXPECT_THROW(lr_at(101, 101, 1e-4), ValidationError);
  double prev = 0.0;
  for (std::size_t s = 0; s <= 30; ++s) {
    EXPECT_GT(lr_at(s, 101, 1e-4), prev);
    prev = lr_at(s, 101, 1e-4);
  }
  for (std::size_t s = 31; s < 101; ++s) {
    EXPECT_LT(lr_at(s, 101, 1e-4), prev);
    prev = lr_at(s, 101, 1e-4);
  }
}

TEST(Clip, ScalesNormTenToOne) {
  VitParams g = zero_params(tiny_config(2));
  g.head_bias(0) = 6.0;
  g.head_bias(1) = 8.0;
  EXPECT_DOUBLE_EQ(clip_gradients(g, 1.0), 10.0);
  EXPECT_DOUBLE_EQ(g.head_bias(0), 0.6);
  EXPECT_DOUBLE_EQ(g.head_bias(1), 0.8);
  EXPECT_LE(global_norm(g), 1.0 + 1e-9);

  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    auto r = zero_params(tiny_config(2));
    for (const auto& t : tensor_views(r))
      for (double& v : t.values()) v = rng.normal() * 10.0;
    clip_gradients(r, 1.0);
    EXPECT_LE(global_norm(r), 1.0 + 1e-9);
  }
}

TEST(AdamW, DecayIsDecoupledFromGradient) {
  const auto cfg_v = tiny_config(2);
  auto params = init_model(cfg_v, 3).params;
  const auto before = params;
  auto state = make_adam_state(cfg_v);
  TrainConfig cfg;
  const auto zero = zero_params(cfg_v);
  adamw_step(params, zero, state, 1e-2, cfg);
  const auto a = tensor_views(before);
  const auto b = tensor_views(params);
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < a[t].size(); ++i)
      ASSERT_DOUBLE_EQ(b[t].data[i], a[t].data[i] * (1.0 - 1e-2 * 0.05)) << a[t].name;
}

TEST(AdamW, FirstStepMovesByLearningRate) {
  const auto cfg_v = tiny_config(2);
  auto params = zero_params(cfg_v);
  auto grads = zero_params(cfg_v);
  grads.head_bias(0) = 0.3;
  grads.head_bias(1) = -2.0;
  auto state = make_adam_state(cfg_v);
  TrainConfig cfg;
  adamw_step(params, grads, state, 1e-3, cfg);
  EXPECT_NEAR(params.head_bias(0), -1e-3, 1e-10);
  EXPECT_NEAR(params.head_bias(1), 1e-3, 1e-10);
}

TEST(EpochMetrics, UniformModel) {
  auto model = init_model(tiny_config(14), 4);
  model.params.head_weight.setZero();
  model.params.head_bias.setZero();
  std::vector<Image> imgs = specvit::testing::random_images(28, 16, 5);
  std::vector<int> labels(28);
  for (int i = 0; i < 28; ++i) labels[static_cast<std::size_t>(i)] = i % 14;
  const auto m = epoch_metrics(model, imgs, labels, 0.0);
  EXPECT_NEAR(m.loss, std::log(14.0), 1e-12);
  EXPECT_NEAR(m.loss, 2.6391, 1e-4);
  EXPECT_DOUBLE_EQ(m.accuracy, 2.0 / 28.0);
}

TEST(Train, LearnsSeparableStripes) {
  const auto tr = stripes(48, 1), va = stripes(16, 2);
  const auto stats = fit_channel_stats(tr.images);
  auto cfg = quick_config();
  cfg.max_epochs = 15;
  cfg.patience = 15;
  const auto result = train(init_model(tiny_config(2), 6), tr, va, stats, cfg);
  const auto& h = result.history;
  ASSERT_FALSE(h.epochs.empty());
  EXPECT_GE(h.epochs[h.best_epoch - 1].val_acc, 0.9);
}

TEST(Train, RestoresBestEpoch) {
  const auto tr = stripes(32, 3), va = stripes(12, 4);
  const auto stats = fit_channel_stats(tr.images);
  const auto result = train(init_model(tiny_config(2), 7), tr, va, stats, quick_config());
  double best = 0.0;
  for (const auto& e : result.history.epochs) best = std::max(best, e.val_acc);
  EXPECT_EQ(result.history.epochs[result.history.best_epoch - 1].val_acc, best);
  std::vector<Image> std_val;
  for (const auto& img : va.images) std_val.push_back(standardize_image(img, stats));
  EXPECT_EQ(epoch_metrics(result.model, std_val, va.labels, 0.0).accuracy, best);
  EXPECT_LE(result.history.epochs.size(), quick_config().max_epochs);
}

TEST(Train, PatienceOneWithFrozenAccuracyStopsAtEpochTwo) {
  LabeledImages tr, va;
  Rng rng(8);
  SpectroImage img(16, 16);
  for (double& v : img.pixels) v = rng.uniform();
  for (int i = 0; i < 8; ++i) {
    tr.images.push_back(img);
    tr.labels.push_back(0);
  }
  va = tr;
  auto cfg = quick_config();
  cfg.patience = 1;
  cfg.peak_lr = 1e-12;
  const auto result = train(init_model(tiny_config(2), 9), tr, va, fit_channel_stats(tr.images), cfg);
  EXPECT_EQ(result.history.epochs.size(), 2u);
  EXPECT_TRUE(result.history.stopped_early);
  EXPECT_EQ(result.history.best_epoch, 1u);
}

TEST(Train, DeterministicHistory) {
  const auto tr = stripes(24, 10), va = stripes(8, 11);
  const auto stats = fit_channel_stats(tr.images);
  auto cfg = quick_config();
  cfg.augment = true;
  cfg.max_epochs = 3;
  cfg.patience = 3;
  const auto a = train(init_model(tiny_config(2), 12), tr, va, stats, cfg);
  const auto b = train(init_model(tiny_config(2), 12), tr, va, stats, cfg);
  std::ostringstream ha, hb;
  write_history_csv(ha, a.history);
  write_history_csv(hb, b.history);
  EXPECT_EQ(ha.str(), hb.str());
  EXPECT_EQ(ha.str().substr(0, 45), "epoch,train_loss,train_acc,val_loss,val_acc,l");
}

TEST(Train, AugmentationOnlyTouchesTraining) {
  const auto tr = stripes(16, 13), va = stripes(8, 14);
  auto cfg = quick_config();
  cfg.augment = true;
  cfg.max_epochs = 2;
  cfg.patience = 2;
  std::size_t train_seen = 0, val_seen = 0;
  bool val_augmented = false, train_plain = false;
  train(init_model(tiny_config(2), 15), tr, va, fit_channel_stats(tr.images), cfg,
        [&](SplitKind kind, std::size_t, bool augmented) {
          if (kind == SplitKind::Train) {
            ++train_seen;
            train_plain |= !augmented;
          } else {
            ++val_seen;
            val_augmented |= augmented;
            EXPECT_EQ(kind, SplitKind::Val);
          }
        });
  EXPECT_EQ(train_seen, 32u);
  EXPECT_EQ(val_seen, 16u);
  EXPECT_FALSE(val_augmented);
  EXPECT_FALSE(train_plain);
}

TEST(Train, NonFiniteLossReportsEpochAndStep) {
  const auto tr = stripes(8, 16), va = stripes(4, 17);
  auto model = init_model(tiny_config(2), 18);
  model.params.head_weight(0, 0) = std::numeric_limits<double>::infinity();
  try {
    train(model, tr, va, fit_channel_stats(tr.images), quick_config());
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch 1 step 0"), std::string::npos) << e.what();
  }
}

TEST(Train, EmptySplitRejected) {
  const auto tr = stripes(8, 19);
  EXPECT_THROW(train(init_model(tiny_config(2), 20), tr, LabeledImages{}, fit_channel_stats(tr.images), quick_config()),
               ValidationError);
}
