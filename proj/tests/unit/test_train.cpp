// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <cmath>

#include "gdres/toy.hpp"
#include "gdres/train.hpp"

using namespace gdres;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

MultiNetConfig tiny_net(int classes, int channels) {
  MultiNetConfig m;
  m.arch.widths = {1, 4, 4, classes};
  m.arch.ratio = 1.3;
  m.channel_sigmas = channel_initial_scales(1.0, std::sqrt(2.0), channels);
  return m;
}

LabeledSet tiny_toy(int classes, int per_class, std::uint64_t seed) {
  ToySpec s;
  s.num_classes = classes;
  s.samples_per_class = per_class;
  s.base_size = 4.0;
  s.canvas_h = s.canvas_w = 15;
  s.seed = seed;
  return gen_toy_dataset(s);
}

}  // namespace

TEST_CASE("AdamW step against a hand-computed update", "[optim]") {
  ArchConfig a;
  a.widths = {1, 1, 1};
  NetworkParams p = zero_params(a);
  std::get<JetLayerWeights>(p.first).coeffs[0] = 0.5;
  NetworkParams g = zeros_like(p);
  std::get<JetLayerWeights>(g.first).coeffs[0] = 0.2;
  AdamWState st = adamw_init(p);
  adamw_step(p, g, st, 0.01, 0.1);
  // p = 0.5 (1 - 0.001) - 0.01 * m_hat / (sqrt(v_hat) + eps), m_hat = 0.2, v_hat = 0.04.
  const double want1 = 0.5 * 0.999 - 0.01 * 0.2 / (0.2 + 1e-8);
  CHECK_THAT(std::get<JetLayerWeights>(p.first).coeffs[0], WithinAbs(want1, 1e-15));
  // Zero-gradient parameters only decay.
  CHECK(std::get<JetLayerWeights>(p.first).coeffs[1] == 0.0);
  CHECK_THAT(p.first_bn.scale[0], WithinAbs(0.999, 1e-15));
  adamw_step(p, g, st, 0.01, 0.0);
  const double m2 = 0.9 * 0.02 + 0.1 * 0.2, v2 = 0.999 * 0.00004 + 0.001 * 0.04;
  const double mh = m2 / (1 - 0.81), vh = v2 / (1 - 0.998001);
  CHECK_THAT(std::get<JetLayerWeights>(p.first).coeffs[0], WithinAbs(want1 - 0.01 * mh / (std::sqrt(vh) + 1e-8), 1e-14));
  CHECK(st.step == 2);
}

TEST_CASE("AdamW with zero gradients is a geometric decay", "[optim]") {
  ArchConfig a;
  a.widths = {1, 2, 2};
  NetworkParams p = zero_params(a);
  Rng rng(2);
  he_uniform_init(p, rng);
  const NetworkParams p0 = p;
  const NetworkParams g = zeros_like(p);
  AdamWState st = adamw_init(p);
  for (int k = 0; k < 3; ++k) adamw_step(p, g, st, 0.1, 0.0);
  CHECK(std::get<JetLayerWeights>(p.first).coeffs == std::get<JetLayerWeights>(p0.first).coeffs);
  for (int k = 0; k < 5; ++k) adamw_step(p, g, st, 0.1, 0.025);
  std::vector<double> x0, x1;
  visit_parameters(p0, [&](ParamFamily, std::span<const double> s) { x0.insert(x0.end(), s.begin(), s.end()); });
  visit_parameters(p, [&](ParamFamily, std::span<const double> s) { x1.insert(x1.end(), s.begin(), s.end()); });
  for (std::size_t i = 0; i < x0.size(); ++i) {
    double want = x0[i];
    for (int k = 0; k < 5; ++k) want -= 0.1 * 0.025 * want;
    CHECK(x1[i] == want);
  }
}

TEST_CASE("AdamW with a constant gradient takes unit steps", "[optim]") {
  ArchConfig a;
  a.widths = {1, 1, 1};
  NetworkParams p = zero_params(a);
  NetworkParams g = zeros_like(p);
  std::get<JetLayerWeights>(g.first).coeffs[2] = -3.7;
  AdamWState st = adamw_init(p);
  double prev = 0.0;
  for (int k = 0; k < 200; ++k) {
    adamw_step(p, g, st, 1e-3, 0.0);
    const double cur = std::get<JetLayerWeights>(p.first).coeffs[2];
    CHECK_THAT((cur - prev) / 1e-3, WithinAbs(1.0, 1e-6));
    prev = cur;
  }
}

TEST_CASE("learning-rate schedule", "[optim]") {
  TrainConfig tc;
  tc.epochs = 10;
  tc.lr_init = 0.01;
  tc.lr_floor = 1e-5;
  tc.warmup_epochs = 2;
  const std::int64_t total = 100;
  CHECK_THAT(lr_schedule(0, total, tc), WithinRel(0.001, 1e-12));
  CHECK_THAT(lr_schedule(10, total, tc), WithinRel(0.0055, 1e-12));
  CHECK_THAT(lr_schedule(20, total, tc), WithinRel(0.01, 1e-12));
  CHECK_THAT(lr_schedule(60, total, tc), WithinRel(1e-5 + (0.01 - 1e-5) * 0.5, 1e-12));
  CHECK_THAT(lr_schedule(100, total, tc), WithinRel(1e-5, 1e-12));
  for (std::int64_t s = 21; s <= 100; ++s) CHECK(lr_schedule(s, total, tc) <= lr_schedule(s - 1, total, tc));
  // Continuous at the warmup junction.
  const double below = 0.01 * (0.1 + 0.9 * (20.0 - 1e-9) / 20.0);
  CHECK_THAT(below, WithinAbs(lr_schedule(20, total, tc), 1e-12));
  tc.warmup_epochs = 0;
  CHECK(lr_schedule(0, total, tc) == 0.01);
  CHECK_THAT(lr_schedule(50, total, tc), WithinAbs((0.01 + 1e-5) / 2, 1e-12));
  CHECK_THROWS_AS(lr_schedule(101, total, tc), InvalidArgument);
}

TEST_CASE("scale-channel dropout is inverted and keeps one channel", "[dropout]") {
  const std::vector<std::vector<double>> ch{{1.0, 2.0}, {3.0, 4.0}, {5.0, 6.0}};
  Rng rng(1);
  const auto id = scale_channel_dropout(ch, 0.5, rng, false);
  CHECK(id.outputs == ch);
  int kept = 0, total = 0;
  for (int t = 0; t < 2000; ++t) {
    const auto r = scale_channel_dropout(ch, 0.9, rng, true);
    int alive = 0;
    for (std::size_t n = 0; n < 3; ++n) {
      if (r.factors[n] != 0.0) {
        ++alive;
        CHECK_THAT(r.factors[n], WithinRel(10.0, 1e-12));
        CHECK_THAT(r.outputs[n][1], WithinRel(10.0 * ch[n][1], 1e-12));
      } else {
        CHECK(r.outputs[n][0] == 0.0);
      }
    }
    CHECK(alive >= 1);
    kept += alive;
    total += 3;
  }
  // With the keep-one guard the kept fraction sits above 1 - q.
  CHECK(static_cast<double>(kept) / total > 0.1);
  CHECK_THROWS_AS(scale_channel_dropout(ch, 1.0, rng), InvalidArgument);
  CHECK(scale_channel_dropout(ch, 0.0, rng, true).outputs == ch);
}

TEST_CASE("scale-channel dropout preserves the mean", "[dropout]") {
  // Five channels so the keep-one guard fires with negligible probability.
  std::vector<std::vector<double>> ch;
  for (int n = 0; n < 5; ++n) ch.push_back({1.0 + n});
  const double q = 0.3;
  const int draws = 10000;
  Rng rng(77);
  std::vector<double> sum(5, 0.0);
  for (int t = 0; t < draws; ++t) {
    const auto r = scale_channel_dropout(ch, q, rng, true);
    for (int n = 0; n < 5; ++n) sum[n] += r.outputs[n][0];
  }
  for (int n = 0; n < 5; ++n) {
    const double x = ch[n][0];
    const double sd = x * std::sqrt(q / (1.0 - q)) / std::sqrt(static_cast<double>(draws));
    CHECK(std::abs(sum[n] / draws - x) < 3.0 * sd);
  }
}

TEST_CASE("loss gradient sums to zero over classes", "[loss]") {
  Rng rng(4);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> z(7);
    for (double& v : z) v = rng.uniform(-20.0, 20.0);
    const auto g = loss_ce_smoothed(z, t % 7, 0.1, 7).second;
    double s = 0.0;
    for (double v : g) s += v;
    CHECK(std::abs(s) < 1e-13);
  }
}

TEST_CASE("random crop with zero padding", "[augment]") {
  Tensor t(5, 5, 1);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) t.at(0, y, x) = 1.0 + y * 5 + x;
  Rng rng(3);
  CHECK(random_crop(t, 0, rng) == t);
  for (int k = 0; k < 50; ++k) {
    const Tensor c = random_crop(t, 2, rng);
    CHECK(c.same_shape(t));
    // Every nonzero value comes from the source with a consistent shift.
    int dy = 99, dx = 99;
    for (int y = 0; y < 5; ++y)
      for (int x = 0; x < 5; ++x)
        if (c.at(0, y, x) != 0.0) {
          const int v = static_cast<int>(c.at(0, y, x)) - 1;
          const int sy = v / 5 - y, sx = v % 5 - x;
          if (dy == 99) {
            dy = sy;
            dx = sx;
          }
          CHECK(sy == dy);
          CHECK(sx == dx);
        }
    CHECK(std::abs(dy) <= 2);
    CHECK(std::abs(dx) <= 2);
  }
}

TEST_CASE("horizontal flip negates the column index", "[augment]") {
  Tensor t(2, 3, 1);
  t.at(0, 0, 0) = 1.0;
  t.at(0, 1, 2) = 2.0;
  const Tensor f = flip_horizontal(t);
  CHECK(f.at(0, 0, 2) == 1.0);
  CHECK(f.at(0, 1, 0) == 2.0);
  CHECK(flip_horizontal(f) == t);
}

TEST_CASE("training is deterministic under a seed", "[train]") {
  const LabeledSet data = tiny_toy(3, 6, 5);
  const MultiNetConfig net = tiny_net(3, 2);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 4;
  tc.channel_dropout_q = 0.3;
  tc.seed = 42;
  const auto a = train_loop(data, &data, net, tc);
  const auto b = train_loop(data, &data, net, tc);
  CHECK(metrics_csv(a.metrics) == metrics_csv(b.metrics));
  CHECK(std::get<JetLayerWeights>(a.params.last).coeffs == std::get<JetLayerWeights>(b.params.last).coeffs);
  tc.seed = 43;
  const auto c = train_loop(data, &data, net, tc);
  CHECK(metrics_csv(a.metrics) != metrics_csv(c.metrics));
  CHECK(metrics_csv(a.metrics).rfind("epoch,step,lr,train_loss,train_acc,val_acc\n", 0) == 0);
  CHECK(a.params.first_bn.mode == BnMode::Eval);
}

TEST_CASE("zero learning rate leaves weights alone", "[train]") {
  const LabeledSet data = tiny_toy(2, 4, 8);
  MultiNetConfig net = tiny_net(2, 1);
  net.arch.widths = {1, 3, 2};
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;
  tc.lr_init = 0.0;
  tc.lr_floor = 0.0;
  NetworkParams init = zero_params(net.arch);
  Rng rng(5);
  he_uniform_init(init, rng);
  const auto r = train_loop(data, nullptr, net, tc, &init);
  CHECK(std::get<JetLayerWeights>(r.params.first).coeffs == std::get<JetLayerWeights>(init.first).coeffs);
  CHECK(r.params.first_bn.scale == init.first_bn.scale);
  CHECK(r.params.first_bn.running_mean != init.first_bn.running_mean);
}

TEST_CASE("training loss falls on a size task", "[train]") {
  int monotone = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ToySpec s;
    s.num_classes = 3;
    s.samples_per_class = 67;
    s.base_size = 4.0;
    s.canvas_h = s.canvas_w = 15;
    s.seed = seed;
    const LabeledSet data = gen_toy_dataset(s);
    TrainConfig tc;
    tc.epochs = 10;
    tc.batch_size = 16;
    tc.lr_init = 0.002;  // at 0.01 the loss plateaus near zero within ten epochs
    tc.seed = seed;
    const auto r = train_loop(data, nullptr, tiny_net(3, 1), tc);
    bool ok = true;
    for (std::size_t e = 1; e < r.metrics.size(); ++e) ok = ok && r.metrics[e].train_loss < r.metrics[e - 1].train_loss;
    monotone += ok ? 1 : 0;
  }
  CHECK(monotone >= 9);
}

TEST_CASE("two-stage schedule checks its inputs", "[train]") {
  const LabeledSet data = tiny_toy(3, 4, 1);
  MultiNetConfig multi = tiny_net(3, 3);
  MultiNetConfig single = multi;
  single.channel_sigmas = {std::sqrt(2.0)};
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 6;
  const auto r = pretrain_then_transfer(data, nullptr, single, multi, tc, tc);
  CHECK(r.metrics.size() == 2);
  // With no second stage the multi network runs on stage-one weights.
  TrainConfig none = tc;
  none.epochs = 0;
  const auto r0 = pretrain_then_transfer(data, nullptr, single, multi, tc, none);
  const auto solo = train_loop(data, nullptr, single, tc);
  CHECK(std::get<JetLayerWeights>(r0.params.last).coeffs == std::get<JetLayerWeights>(solo.params.last).coeffs);
  CHECK_NOTHROW(predict_batch(data.images, multi, r0.params));
  single.channel_sigmas = {1.1};
  CHECK_THROWS_AS(pretrain_then_transfer(data, nullptr, single, multi, tc, tc), InvalidArgument);
  single.channel_sigmas = multi.channel_sigmas;
  CHECK_THROWS_AS(pretrain_then_transfer(data, nullptr, single, multi, tc, tc), InvalidArgument);
}

TEST_CASE("train configuration validation", "[train]") {
  TrainConfig tc;
  CHECK_NOTHROW(tc.validate());
  tc.colour_jitter = true;
  CHECK_THROWS_AS(tc.validate(), InvalidArgument);
  tc = {};
  tc.channel_dropout_q = 1.0;
  CHECK_THROWS_AS(tc.validate(), InvalidArgument);
  tc = {};
  tc.warmup_epochs = 20;
  CHECK_THROWS_AS(tc.validate(), InvalidArgument);
}
