// SPDX-License-Identifier: Apache-2.0
//
// Declarative experiment files: one `key = value` per line, `#` comments.
// Key names follow the rows of the model and training parameter tables.
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gdres/binary_io.hpp"
#include "gdres/error.hpp"
#include "gdres/net_config.hpp"
#include "gdres/serialize.hpp"
#include "gdres/train.hpp"

namespace gdres {

struct PretrainConfig {
  int first_stage_epochs = 0;
  int second_stage_epochs = 0;
  int first_stage_batch_size = 16;
  int second_stage_batch_size = 16;
  double first_stage_learning_rate = 0.01;
  double second_stage_learning_rate = 0.005;
  /// Initial scale of the single channel trained in the first stage.
  double single_channel_scale = 1.0;
};

struct ExperimentConfig {
  std::string name = "unnamed";
  MultiNetConfig net;
  TrainConfig train;
  PretrainConfig pretrain;
  int input_channels = 1;
  int input_h = 32;
  int input_w = 32;

  /// Single-channel network at pretrain.single_channel_scale.
  MultiNetConfig single_channel() const {
    MultiNetConfig s = net;
    s.channel_sigmas = {pretrain.single_channel_scale};
    return s;
  }

  TrainConfig stage_config(int stage) const {
    TrainConfig t = train;
    t.epochs = stage == 1 ? pretrain.first_stage_epochs : pretrain.second_stage_epochs;
    t.batch_size = stage == 1 ? pretrain.first_stage_batch_size : pretrain.second_stage_batch_size;
    t.lr_init = stage == 1 ? pretrain.first_stage_learning_rate : pretrain.second_stage_learning_rate;
    t.warmup_epochs = std::min(t.warmup_epochs, t.epochs);
    if (stage == 1) t.channel_dropout_q = 0.0;
    return t;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<int> parse_dash_list(const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, '-')) out.push_back(std::stoi(tok));
  return out;
}

inline std::string join_dash(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "-" : "") + std::to_string(v[i]);
  return s;
}

}  // namespace detail

/// Parses an experiment file. Unknown keys are rejected.
inline ExperimentConfig parse_config(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw InvalidArgument("config line " + std::to_string(lineno) + ": expected key = value");
    kv[detail::trim(line.substr(0, eq))] = detail::trim(line.substr(eq + 1));
  }

  ExperimentConfig c;
  int channels = 1;
  double smin = 1.0;
  auto take = [&](const std::string& key, auto&& apply) {
    auto it = kv.find(key);
    if (it == kv.end()) return;
    try {
      apply(it->second);
    } catch (const InvalidArgument&) {
      throw;
    } catch (const std::exception&) {
      throw InvalidArgument("config: bad value for " + key + ": '" + it->second + "'");
    }
    kv.erase(it);
  };
  auto as_bool = [](const std::string& v) {
    if (v == "with" || v == "true" || v == "yes") return true;
    if (v == "without" || v == "false" || v == "no") return false;
    throw InvalidArgument("config: expected with/without, got '" + v + "'");
  };

  take("name", [&](const std::string& v) { c.name = v; });
  take("number_of_scale_channels", [&](const std::string& v) { channels = std::stoi(v); });
  take("initial_scale_min", [&](const std::string& v) { smin = std::stod(v); });
  take("initial_scale_ratio", [&](const std::string& v) { c.net.lambda = std::stod(v); });
  take("relative_scale_ratio", [&](const std::string& v) { c.net.arch.ratio = std::stod(v); });
  take("relative_truncation_error_bound", [&](const std::string& v) { c.net.arch.epsilon = std::stod(v); });
  take("intermediate_feature_channels", [&](const std::string& v) { c.net.arch.widths = detail::parse_dash_list(v); });
  take("jet_order", [&](const std::string& v) { c.net.arch.jet_order = std::stoi(v); });
  take("spatial_selection_method", [&](const std::string& v) { c.net.arch.selection = parse_selection(v); });
  take("zeroth_order_term", [&](const std::string& v) { c.net.arch.zero_order_higher = as_bool(v); });
  take("depthwise_separable_blocks", [&](const std::string& v) { c.net.arch.depthwise_blocks = std::stoi(v); });
  take("scale_pooling", [&](const std::string& v) { c.net.pooling = parse_pooling(v); });
  take("boundary", [&](const std::string& v) { c.net.arch.boundary = parse_boundary(v); });
  take("batch_norm_momentum", [&](const std::string& v) { c.net.arch.bn_momentum = std::stod(v); });
  take("input_image_size", [&](const std::string& v) {
    if (std::sscanf(v.c_str(), "%dx%dx%d", &c.input_channels, &c.input_h, &c.input_w) != 3)
      throw InvalidArgument("config: input_image_size must look like 1x72x72");
  });
  take("number_of_epochs", [&](const std::string& v) { c.train.epochs = std::stoi(v); });
  take("batch_size", [&](const std::string& v) { c.train.batch_size = std::stoi(v); });
  take("initial_learning_rate", [&](const std::string& v) { c.train.lr_init = std::stod(v); });
  take("final_learning_rate", [&](const std::string& v) { c.train.lr_floor = std::stod(v); });
  take("number_of_warmup_epochs", [&](const std::string& v) { c.train.warmup_epochs = std::stoi(v); });
  take("weight_decay", [&](const std::string& v) { c.train.weight_decay = std::stod(v); });
  take("scale_channel_dropout_factor", [&](const std::string& v) { c.train.channel_dropout_q = std::stod(v); });
  take("label_smoothing", [&](const std::string& v) { c.train.label_smoothing = std::stod(v); });
  take("random_cropping_padding", [&](const std::string& v) { c.train.random_crop_pad = std::stoi(v); });
  take("horizontal_flip_probability", [&](const std::string& v) { c.train.flip_probability = std::stod(v); });
  take("seed", [&](const std::string& v) { c.train.seed = std::stoull(v); });
  take("first_stage_epochs", [&](const std::string& v) { c.pretrain.first_stage_epochs = std::stoi(v); });
  take("second_stage_epochs", [&](const std::string& v) { c.pretrain.second_stage_epochs = std::stoi(v); });
  take("first_stage_batch_size", [&](const std::string& v) { c.pretrain.first_stage_batch_size = std::stoi(v); });
  take("second_stage_batch_size", [&](const std::string& v) { c.pretrain.second_stage_batch_size = std::stoi(v); });
  take("first_stage_learning_rate", [&](const std::string& v) { c.pretrain.first_stage_learning_rate = std::stod(v); });
  take("second_stage_learning_rate", [&](const std::string& v) { c.pretrain.second_stage_learning_rate = std::stod(v); });
  take("single_channel_scale", [&](const std::string& v) { c.pretrain.single_channel_scale = std::stod(v); });
  if (!kv.empty()) throw InvalidArgument("config: unknown key '" + kv.begin()->first + "'");

  c.net.channel_sigmas = channel_initial_scales(smin, c.net.lambda, channels);
  if (c.input_channels != c.net.arch.input_channels())
    throw InvalidArgument("config: input_image_size channels differ from the first feature width");
  c.net.validate();
  c.train.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) { return parse_config(io::read_text(path)); }

/// Text form that parse_config reads back to the same configuration.
inline std::string config_text(const ExperimentConfig& c) {
  std::ostringstream o;
  o.precision(17);
  const auto& a = c.net.arch;
  o << "name = " << c.name << "\n"
    << "number_of_scale_channels = " << c.net.num_channels() << "\n"
    << "initial_scale_min = " << c.net.channel_sigmas.front() << "\n"
    << "initial_scale_ratio = " << c.net.lambda << "\n"
    << "relative_scale_ratio = " << a.ratio << "\n"
    << "relative_truncation_error_bound = " << a.epsilon << "\n"
    << "intermediate_feature_channels = " << detail::join_dash(a.widths) << "\n"
    << "jet_order = " << a.jet_order << "\n"
    << "spatial_selection_method = " << to_string(a.selection) << "\n"
    << "zeroth_order_term = " << (a.zero_order_higher ? "with" : "without") << "\n"
    << "depthwise_separable_blocks = " << a.depthwise_blocks << "\n"
    << "scale_pooling = " << to_string(c.net.pooling) << "\n"
    << "boundary = " << (a.boundary == Boundary::Mirror ? "mirror" : "zero") << "\n"
    << "batch_norm_momentum = " << a.bn_momentum << "\n"
    << "input_image_size = " << c.input_channels << "x" << c.input_h << "x" << c.input_w << "\n"
    << "number_of_epochs = " << c.train.epochs << "\n"
    << "batch_size = " << c.train.batch_size << "\n"
    << "initial_learning_rate = " << c.train.lr_init << "\n"
    << "final_learning_rate = " << c.train.lr_floor << "\n"
    << "number_of_warmup_epochs = " << c.train.warmup_epochs << "\n"
    << "weight_decay = " << c.train.weight_decay << "\n"
    << "scale_channel_dropout_factor = " << c.train.channel_dropout_q << "\n"
    << "label_smoothing = " << c.train.label_smoothing << "\n"
    << "random_cropping_padding = " << c.train.random_crop_pad << "\n"
    << "horizontal_flip_probability = " << c.train.flip_probability << "\n"
    << "seed = " << c.train.seed << "\n"
    << "first_stage_epochs = " << c.pretrain.first_stage_epochs << "\n"
    << "second_stage_epochs = " << c.pretrain.second_stage_epochs << "\n"
    << "first_stage_batch_size = " << c.pretrain.first_stage_batch_size << "\n"
    << "second_stage_batch_size = " << c.pretrain.second_stage_batch_size << "\n"
    << "first_stage_learning_rate = " << c.pretrain.first_stage_learning_rate << "\n"
    << "second_stage_learning_rate = " << c.pretrain.second_stage_learning_rate << "\n"
    << "single_channel_scale = " << c.pretrain.single_channel_scale << "\n";
  return o.str();
}

}  // namespace gdres
