// SPDX-License-Identifier: Apache-2.0
#include <chrono>
#include <cmath>
#include <cstdio>
#include <optional>

#include "commands.hpp"

namespace gdres::cli {

namespace {

void check_dataset_fits(const LabeledSet& set, const ExperimentConfig& cfg, const std::string& what) {
  if (set.num_classes != cfg.net.num_classes())
    throw InvalidArgument(what + " has " + std::to_string(set.num_classes) + " classes, the network " +
                          std::to_string(cfg.net.num_classes()));
  for (const Tensor& t : set.images) {
    if (t.channels() != cfg.input_channels)
      throw ShapeMismatch(what + ": image has " + std::to_string(t.channels()) + " channels, config expects " +
                          std::to_string(cfg.input_channels));
    if (t.height() != cfg.input_h || t.width() != cfg.input_w)
      throw ShapeMismatch(what + ": image is " + std::to_string(t.height()) + "x" + std::to_string(t.width()) +
                          ", config expects " + std::to_string(cfg.input_h) + "x" + std::to_string(cfg.input_w));
  }
}

struct TrainOptions {
  std::filesystem::path config;
  std::filesystem::path dataset;
  std::filesystem::path out;
  bool force = false;
  bool pretrain = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
};

void run_train(const TrainOptions& o) {
  ExperimentConfig cfg = load_config(o.config);
  if (o.seed) cfg.train.seed = *o.seed;
  if (o.epochs) cfg.train.epochs = *o.epochs;
  const LoadedDataset data = load_dataset(o.dataset, false);
  check_dataset_fits(data.train, cfg, "training split");
  const LabeledSet* val = data.val.empty() ? nullptr : &data.val;
  if (val) check_dataset_fits(*val, cfg, "validation split");
  prepare_output_dir(o.out, o.force);

  auto report = [](const EpochMetrics& m) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %d  step %lld  lr %.3g  loss %.4f  acc %.3f", m.epoch,
                  static_cast<long long>(m.step), m.lr, m.train_loss, m.train_acc);
    std::string line = buf;
    if (m.val_acc >= 0) {
      std::snprintf(buf, sizeof buf, "  val %.3f", m.val_acc);
      line += buf;
    }
    log(line);
    if (!std::isfinite(m.train_loss)) throw NonConvergence("training loss is not finite at epoch " + std::to_string(m.epoch));
  };

  const auto t0 = std::chrono::steady_clock::now();
  TrainResult res;
  if (o.pretrain) {
    TrainConfig s1 = cfg.stage_config(1), s2 = cfg.stage_config(2);
    s1.seed = s2.seed = cfg.train.seed;
    res = pretrain_then_transfer(data.train, val, cfg.single_channel(), cfg.net, s1, s2, report);
  } else {
    res = train_loop(data.train, val, cfg.net, cfg.train, nullptr, report);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  Json extra{{"seed", cfg.train.seed},
             {"pretrain", o.pretrain},
             {"config_text", config_text(cfg)},
             {"dataset", o.dataset.string()},
             {"runtime_seconds", secs}};
  save_checkpoint(o.out / "model.gdck", res.params, cfg.net, extra);
  io::write_text_atomic(o.out / "metrics.csv", metrics_csv(res.metrics));
  io::write_text_atomic(o.out / "config.txt", config_text(cfg));
  log("saved " + (o.out / "model.gdck").string());
}

struct EvalOptions {
  std::filesystem::path checkpoint;
  std::filesystem::path dataset;
  std::filesystem::path out;
  bool force = false;
  std::string pooling;
  int densify = 1;
  int extra_top = 0;
  std::string split = "test";
};

void run_eval(const EvalOptions& o) {
  Checkpoint ck = load_checkpoint(o.checkpoint);
  MultiNetConfig cfg = ck.config;
  if (!o.pooling.empty()) cfg.pooling = parse_pooling(o.pooling);
  if (o.densify > 1 || o.extra_top > 0) cfg = refine_channels(cfg, o.densify, o.extra_top);
  const DensifiedNet net(ck.params, ck.config, cfg);

  const LoadedDataset data = load_dataset(o.dataset, o.split == "test");
  std::vector<RescaledSet> sets;
  if (o.split == "test") {
    sets = data.tests;
    if (sets.empty()) throw InvalidArgument("dataset has no rescaled test sets");
  } else {
    const LabeledSet& s = o.split == "train" ? data.train : data.val;
    if (s.empty()) throw InvalidArgument("dataset has no " + o.split + " split");
    sets.push_back({1.0, s});
  }
  for (const auto& s : sets)
    if (s.set.num_classes != cfg.num_classes()) throw InvalidArgument("dataset classes do not match the checkpoint");

  prepare_output_dir(o.out, o.force);
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentReport rep = evaluate_factors(sets, cfg.pooling, cfg.num_channels(), [&](const std::vector<Tensor>& imgs) {
    return predict_batch(imgs, net.config(), ck.params);
  });
  rep.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  rep.config = to_json(cfg);
  if (ck.header.contains("extra")) rep.seed = ck.header["extra"].value("seed", std::uint64_t{0});

  io::write_text_atomic(o.out / "report.json", rep.to_json().dump(2) + "\n");
  io::write_text_atomic(o.out / "accuracy.csv", rep.accuracy_csv());
  io::write_text_atomic(o.out / "histogram.csv", rep.histogram_csv());
  for (const auto& f : rep.factors) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "factor %.4f  accuracy %.4f  mean channel %.2f", f.factor, f.accuracy, f.mean_channel);
    std::printf("%s\n", buf);
  }
}

}  // namespace

void add_train(CLI::App& app) {
  auto o = std::make_shared<TrainOptions>();
  CLI::App* sub = app.add_subcommand("train", "Train a network from a config file");
  sub->add_option("--config", o->config, "Experiment config (key = value)")->required()->check(CLI::ExistingFile);
  sub->add_option("--dataset", o->dataset, "Dataset directory from gen-dataset")->required()->check(CLI::ExistingDirectory);
  sub->add_option("--out", o->out, "Output directory")->required();
  sub->add_flag("--force", o->force, "Replace a non-empty output directory");
  sub->add_flag("--pretrain", o->pretrain, "Train one channel first, then all channels");
  sub->add_option("--seed", o->seed, "Override the config seed");
  sub->add_option("--epochs", o->epochs, "Override the number of epochs")->check(CLI::NonNegativeNumber);
  sub->callback([o] { run_train(*o); });
}

void add_eval(CLI::App& app) {
  auto o = std::make_shared<EvalOptions>();
  CLI::App* sub = app.add_subcommand("eval", "Evaluate a checkpoint over rescaled test sets");
  sub->add_option("--checkpoint", o->checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  sub->add_option("--dataset", o->dataset, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  sub->add_option("--out", o->out, "Output directory")->required();
  sub->add_flag("--force", o->force, "Replace a non-empty output directory");
  sub->add_option("--pooling", o->pooling, "Override scale pooling")->check(CLI::IsMember({"max", "average", "avg", "logsumexp", "lse"}));
  sub->add_option("--densify", o->densify, "Subdivide each channel interval this many times")
      ->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--extra-top", o->extra_top, "Channels added above the trained range")
      ->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--split", o->split, "Split to evaluate")->check(CLI::IsMember({"test", "val", "train"}))
      ->capture_default_str();
  sub->callback([o] { run_eval(*o); });
}

}  // namespace gdres::cli
