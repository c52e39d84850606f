// SPDX-License-Identifier: Apache-2.0
//
// Loss, optimiser, schedule, regularisers and the training loop.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gdres/dataset.hpp"
#include "gdres/error.hpp"
#include "gdres/forward.hpp"
#include "gdres/network.hpp"
#include "gdres/params.hpp"
#include "gdres/rng.hpp"
#include "gdres/selection.hpp"

namespace gdres {

struct TrainConfig {
  int epochs = 10;
  int batch_size = 16;
  double lr_init = 0.01;
  double lr_floor = 1e-5;
  int warmup_epochs = 0;
  double warmup_start_fraction = 0.1;
  double weight_decay = 0.0;
  double label_smoothing = 0.0;
  double channel_dropout_q = 0.0;
  double flip_probability = 0.5;
  /// Zero padding before a random crop back to the original size; 0 disables.
  int random_crop_pad = 0;
  /// Reserved for colour data; grayscale toy data never uses it.
  bool colour_jitter = false;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 0) throw InvalidArgument("TrainConfig: epochs must be non-negative");
    if (batch_size < 1) throw InvalidArgument("TrainConfig: batch_size must be positive");
    if (!(label_smoothing >= 0.0 && label_smoothing < 1.0))
      throw InvalidArgument("TrainConfig: label_smoothing must lie in [0,1)");
    if (!(channel_dropout_q >= 0.0 && channel_dropout_q < 1.0))
      throw InvalidArgument("TrainConfig: channel_dropout_q must lie in [0,1)");
    if (warmup_epochs < 0 || (epochs > 0 && warmup_epochs > epochs))
      throw InvalidArgument("TrainConfig: warmup_epochs out of range");
    if (random_crop_pad < 0) throw InvalidArgument("TrainConfig: random_crop_pad must be non-negative");
    if (colour_jitter) throw InvalidArgument("TrainConfig: colour jitter is not implemented");
  }
};

/// Label-smoothed cross-entropy and its gradient with respect to the logits.
inline std::pair<double, std::vector<double>> loss_ce_smoothed(const std::vector<double>& logits, int target,
                                                               double eps_ls, int num_classes) {
  detail::require_shape(static_cast<int>(logits.size()) == num_classes, "loss: logit count mismatch");
  if (target < 0 || target >= num_classes) throw InvalidArgument("loss: target out of range");
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - m);
  const double log_z = std::log(z) + m;
  double loss = 0.0;
  std::vector<double> grad(logits.size());
  for (int k = 0; k < num_classes; ++k) {
    const double soft = (k == target ? 1.0 - eps_ls : 0.0) + eps_ls / num_classes;
    const double logp = logits[static_cast<std::size_t>(k)] - log_z;
    loss -= soft * logp;
    grad[static_cast<std::size_t>(k)] = std::exp(logp) - soft;
  }
  return {loss, grad};
}

struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

inline AdamWState adamw_init(const NetworkParams& p) {
  AdamWState s;
  const std::size_t n = parameter_count(p);
  s.m.assign(n, 0.0);
  s.v.assign(n, 0.0);
  return s;
}

/// One AdamW step: params *= (1 - lr wd), then the bias-corrected Adam
/// update.
inline void adamw_step(NetworkParams& params, const NetworkParams& grads, AdamWState& st, double lr,
                       double weight_decay) {
  std::vector<std::span<double>> ps;
  std::vector<std::span<const double>> gs;
  visit_parameters(params, [&](ParamFamily, std::span<double> s) { ps.push_back(s); });
  visit_parameters(grads, [&](ParamFamily, std::span<const double> s) { gs.push_back(s); });
  detail::require_shape(ps.size() == gs.size(), "adamw_step: gradient structure mismatch");
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  std::size_t k = 0;
  for (std::size_t a = 0; a < ps.size(); ++a) {
    detail::require_shape(ps[a].size() == gs[a].size(), "adamw_step: gradient shape mismatch");
    for (std::size_t i = 0; i < ps[a].size(); ++i, ++k) {
      const double g = gs[a][i];
      double& p = ps[a][i];
      p -= lr * weight_decay * p;
      st.m[k] = st.beta1 * st.m[k] + (1.0 - st.beta1) * g;
      st.v[k] = st.beta2 * st.v[k] + (1.0 - st.beta2) * g * g;
      const double mh = st.m[k] / bc1, vh = st.v[k] / bc2;
      p -= lr * mh / (std::sqrt(vh) + st.eps);
    }
  }
  detail::require_shape(k == st.m.size(), "adamw_step: optimiser state size mismatch");
}

/// Linear warm-up from warmup_start_fraction * lr_init to lr_init over the
/// warm-up epochs, then cosine decay to lr_floor at total_steps.
inline double lr_schedule(std::int64_t step, std::int64_t total_steps, const TrainConfig& cfg) {
  if (total_steps <= 0) return cfg.lr_init;
  if (step < 0 || step > total_steps) throw InvalidArgument("lr_schedule: step out of range");
  const double warm = cfg.epochs > 0
                          ? static_cast<double>(cfg.warmup_epochs) * static_cast<double>(total_steps) / cfg.epochs
                          : 0.0;
  const double s = static_cast<double>(step);
  if (s < warm) {
    const double f = cfg.warmup_start_fraction;
    return cfg.lr_init * (f + (1.0 - f) * s / warm);
  }
  const double span = static_cast<double>(total_steps) - warm;
  const double t = span > 0.0 ? (s - warm) / span : 1.0;
  return cfg.lr_floor + (cfg.lr_init - cfg.lr_floor) * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

struct DropoutResult {
  std::vector<std::vector<double>> outputs;
  std::vector<double> factors;  // 0 for dropped channels, 1/(1-q) for kept ones
};

/// Inverted dropout over whole scale channels. When every channel drops,
/// one uniformly chosen channel is kept. Identity when not training.
inline DropoutResult scale_channel_dropout(const std::vector<std::vector<double>>& channel_outputs, double q,
                                           Rng& rng, bool training = true) {
  if (!(q >= 0.0 && q < 1.0)) throw InvalidArgument("scale_channel_dropout: q must lie in [0,1)");
  DropoutResult r{channel_outputs, std::vector<double>(channel_outputs.size(), 1.0)};
  if (!training || q == 0.0 || channel_outputs.empty()) return r;
  const double keep = 1.0 / (1.0 - q);
  bool any = false;
  for (double& f : r.factors) {
    f = rng.bernoulli(q) ? 0.0 : keep;
    any = any || f != 0.0;
  }
  if (!any) r.factors[rng.below(r.factors.size())] = keep;
  for (std::size_t n = 0; n < r.outputs.size(); ++n)
    for (double& v : r.outputs[n]) v *= r.factors[n];
  return r;
}

struct StepStats {
  double loss_sum = 0.0;
  int correct = 0;
  int count = 0;
};

/// Forward and backward over one batch. Gradients of the batch-mean loss
/// accumulate into `grads`.
inline StepStats train_step(const std::vector<Tensor>& images, const std::vector<int>& labels,
                            const MultiNetConfig& cfg, NetworkParams& params, NetworkParams& grads,
                            double label_smoothing, double dropout_q, Rng& rng) {
  const std::size_t B = images.size();
  const std::size_t N = cfg.channel_sigmas.size();
  const int K = cfg.num_classes();
  std::vector<Tensor> items;
  std::vector<double> sig;
  items.reserve(B * N);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t n = 0; n < N; ++n) {
      items.push_back(images[b]);
      sig.push_back(cfg.channel_sigmas[n]);
    }
  GradTape tape;
  auto maps = forward_batch(items, sig, cfg.arch, params, &tape);
  std::vector<SelectionTrace> sel(items.size());
  std::vector<Tensor> grad_maps;
  grad_maps.reserve(items.size());
  for (const Tensor& m : maps) grad_maps.push_back(Tensor::zeros_like(m));

  StepStats st;
  for (std::size_t b = 0; b < B; ++b) {
    std::vector<std::vector<double>> ch(N);
    for (std::size_t n = 0; n < N; ++n) ch[n] = spatial_select(maps[b * N + n], cfg.arch.selection, &sel[b * N + n]);
    const DropoutResult dr = scale_channel_dropout(ch, dropout_q, rng, true);
    const auto logits = scale_pool(dr.outputs, cfg.pooling);
    auto [loss, g] = loss_ce_smoothed(logits, labels[b], label_smoothing, K);
    st.loss_sum += loss;
    st.correct += argmax(logits) == labels[b] ? 1 : 0;
    ++st.count;
    for (double& v : g) v /= static_cast<double>(B);
    const auto gch = scale_pool_backward(dr.outputs, cfg.pooling, g);
    for (std::size_t n = 0; n < N; ++n) {
      std::vector<double> gn = gch[n];
      for (double& v : gn) v *= dr.factors[n];
      spatial_select_backward(sel[b * N + n], gn, grad_maps[b * N + n]);
    }
  }
  backward_batch(tape, std::move(grad_maps), cfg.arch, params, grads);
  return st;
}

/// Zero-padded random crop back to the input size.
inline Tensor random_crop(const Tensor& img, int pad, Rng& rng) {
  if (pad == 0) return img;
  const int dy = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * pad + 1))) - pad;
  const int dx = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * pad + 1))) - pad;
  Tensor out = Tensor::zeros_like(img);
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) {
        const int sy = y + dy, sx = x + dx;
        if (sy >= 0 && sy < img.height() && sx >= 0 && sx < img.width()) out.at(c, y, x) = img.at(c, sy, sx);
      }
  return out;
}

/// Predictions for many images in Eval mode, `chunk` samples at a time.
inline std::vector<Prediction> predict_batch(const std::vector<Tensor>& images, const MultiNetConfig& cfg,
                                             const NetworkParams& params, std::size_t chunk = 8) {
  cfg.validate();
  NetworkParams ev = params;
  set_bn_mode(ev, BnMode::Eval);
  const std::size_t N = cfg.channel_sigmas.size();
  std::vector<Prediction> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += chunk) {
    const std::size_t end = std::min(images.size(), start + chunk);
    std::vector<Tensor> items;
    std::vector<double> sig;
    for (std::size_t b = start; b < end; ++b)
      for (std::size_t n = 0; n < N; ++n) {
        items.push_back(images[b]);
        sig.push_back(cfg.channel_sigmas[n]);
      }
    const auto maps = forward_batch(items, sig, cfg.arch, std::as_const(ev));
    for (std::size_t b = 0; b < end - start; ++b) {
      Prediction p;
      for (std::size_t n = 0; n < N; ++n) p.per_channel.push_back(spatial_select(maps[b * N + n], cfg.arch.selection));
      p.scores = scale_pool(p.per_channel, cfg.pooling);
      p.label = argmax(p.scores);
      out.push_back(std::move(p));
    }
  }
  return out;
}

inline double accuracy(const std::vector<Prediction>& preds, const std::vector<int>& labels) {
  detail::require_shape(preds.size() == labels.size(), "accuracy: size mismatch");
  if (preds.empty()) return 0.0;
  std::size_t ok = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) ok += preds[i].label == labels[i] ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(preds.size());
}

inline double evaluate_accuracy(const LabeledSet& set, const MultiNetConfig& cfg, const NetworkParams& params) {
  return accuracy(predict_batch(set.images, cfg, params), set.labels);
}

struct EpochMetrics {
  int epoch = 0;
  std::int64_t step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = -1.0;  // negative when no validation set was given
};

inline std::string metrics_csv(const std::vector<EpochMetrics>& rows) {
  std::string s = "epoch,step,lr,train_loss,train_acc,val_acc\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%d,%lld,%.17g,%.17g,%.17g,%s\n", r.epoch, static_cast<long long>(r.step), r.lr,
                  r.train_loss, r.train_acc, r.val_acc < 0 ? "" : std::to_string(r.val_acc).c_str());
    s += buf;
  }
  return s;
}

struct TrainResult {
  NetworkParams params;
  std::vector<EpochMetrics> metrics;
};

/// Seeded, sequential training. Starts from `init` when given, otherwise
/// from a uniform He initialisation drawn from the seed.
inline TrainResult train_loop(const LabeledSet& train, const LabeledSet* val, const MultiNetConfig& cfg,
                              const TrainConfig& tc, const NetworkParams* init = nullptr,
                              const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  cfg.validate();
  tc.validate();
  train.validate();
  if (train.empty()) throw InvalidArgument("train_loop: empty dataset");
  if (train.num_classes != cfg.num_classes())
    throw InvalidArgument("train_loop: dataset classes do not match the network");
  Rng rng(tc.seed);
  Rng init_rng = rng.fork();
  TrainResult res;
  if (init) {
    res.params = *init;
  } else {
    res.params = zero_params(cfg.arch);
    he_uniform_init(res.params, init_rng);
  }
  AdamWState opt = adamw_init(res.params);
  const std::size_t n = train.size();
  const std::int64_t steps_per_epoch = static_cast<std::int64_t>((n + tc.batch_size - 1) / tc.batch_size);
  const std::int64_t total = steps_per_epoch * tc.epochs;
  std::int64_t step = 0;
  std::vector<std::size_t> order(n);
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    set_bn_mode(res.params, BnMode::Train);
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    StepStats ep;
    double lr = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(tc.batch_size));
      std::vector<Tensor> imgs;
      std::vector<int> labels;
      for (std::size_t i = start; i < end; ++i) {
        Tensor img = train.images[order[i]];
        if (rng.bernoulli(tc.flip_probability)) img = flip_horizontal(img);
        img = random_crop(img, tc.random_crop_pad, rng);
        imgs.push_back(std::move(img));
        labels.push_back(train.labels[order[i]]);
      }
      NetworkParams grads = zeros_like(res.params);
      const StepStats s =
          train_step(imgs, labels, cfg, res.params, grads, tc.label_smoothing, tc.channel_dropout_q, rng);
      lr = lr_schedule(step, total, tc);
      adamw_step(res.params, grads, opt, lr, tc.weight_decay);
      ++step;
      ep.loss_sum += s.loss_sum;
      ep.correct += s.correct;
      ep.count += s.count;
    }
    set_bn_mode(res.params, BnMode::Eval);
    EpochMetrics m;
    m.epoch = epoch;
    m.step = step;
    m.lr = lr;
    m.train_loss = ep.loss_sum / ep.count;
    m.train_acc = static_cast<double>(ep.correct) / ep.count;
    if (val && !val->empty()) m.val_acc = evaluate_accuracy(*val, cfg, res.params);
    res.metrics.push_back(m);
    if (on_epoch) on_epoch(m);
  }
  set_bn_mode(res.params, BnMode::Eval);
  return res;
}

/// Two-stage schedule: train the single-channel network, then continue
/// with all scale channels from the learned shared weights.
inline TrainResult pretrain_then_transfer(const LabeledSet& train, const LabeledSet* val,
                                          const MultiNetConfig& single, const MultiNetConfig& multi,
                                          const TrainConfig& stage1, const TrainConfig& stage2,
                                          const std::function<void(const EpochMetrics&)>& on_epoch = {}) {
  single.validate();
  multi.validate();
  if (single.num_channels() != 1) throw InvalidArgument("pretrain_then_transfer: stage one needs one channel");
  if (!is_refinement(single.channel_sigmas, multi.channel_sigmas))
    throw InvalidArgument("pretrain_then_transfer: single-channel scale is not a channel of the multi network");
  if (single.arch.widths != multi.arch.widths || single.arch.jet_order != multi.arch.jet_order ||
      single.arch.zero_order_higher != multi.arch.zero_order_higher ||
      single.arch.depthwise_blocks != multi.arch.depthwise_blocks || single.arch.ratio != multi.arch.ratio)
    throw InvalidArgument("pretrain_then_transfer: architectures differ");
  TrainResult first = train_loop(train, val, single, stage1, nullptr, on_epoch);
  if (stage2.epochs == 0) return first;
  TrainResult second = train_loop(train, val, multi, stage2, &first.params, on_epoch);
  first.metrics.insert(first.metrics.end(), second.metrics.begin(), second.metrics.end());
  second.metrics = std::move(first.metrics);
  return second;
}

}  // namespace gdres
