// SPDX-License-Identifier: Apache-2.0
#include <catch_amalgamated.hpp>

#include <filesystem>

#include "gdres/config.hpp"
#include "gdres/report.hpp"
#include "gdres/serialize.hpp"
#include "gdres/tensor_io.hpp"

using namespace gdres;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "gdres_test_io";
  std::filesystem::create_directories(dir);
  const auto p = dir / name;
  std::filesystem::remove(p);
  std::filesystem::remove(sidecar_path(p));
  return p;
}

Tensor random_tensor(int h, int w, int c, std::uint64_t seed) {
  Rng rng(seed);
  Tensor t(h, w, c);
  for (double& v : t.data()) v = rng.uniform(-5.0, 5.0);
  return t;
}

}  // namespace

TEST_CASE("tensor files round-trip bit for bit", "[io]") {
  const Tensor t = random_tensor(7, 5, 3, 1);
  const auto p = scratch("t.gdt");
  write_tensor(p, t);
  const Tensor r = read_tensor(p);
  CHECK(r == t);
  const io::Bytes b = io::read_file(p);
  CHECK(b.size() == 5 + 12 + 8 * t.size());
  CHECK(std::string(b.begin(), b.begin() + 5) == "GDTN1");
  CHECK(b[5] == 7);  // little-endian height
  CHECK(b[6] == 0);
}

TEST_CASE("tensor decoding rejects bad input", "[io]") {
  const Tensor t = random_tensor(3, 4, 2, 2);
  io::Bytes b = encode_tensor(t);
  io::Bytes bad = b;
  bad[0] = 'X';
  CHECK_THROWS_AS(decode_tensor(bad), FormatError);
  io::Bytes cut(b.begin(), b.end() - 3);
  CHECK_THROWS_AS(decode_tensor(cut), FormatError);
  CHECK_THROWS_AS(decode_tensor(io::Bytes{'G', 'D'}), FormatError);
  // The same file written big-endian.
  io::Bytes be(b.begin(), b.begin() + 5);
  for (std::uint32_t d : {3u, 4u, 2u}) {
    be.push_back(0);
    be.push_back(0);
    be.push_back(0);
    be.push_back(static_cast<unsigned char>(d));
  }
  be.insert(be.end(), b.begin() + 17, b.end());
  CHECK_THROWS_AS(decode_tensor(be), FormatError);
}

TEST_CASE("graymaps round-trip quantized data exactly", "[io]") {
  for (int bits : {8, 16}) {
    const int maxval = bits == 8 ? 255 : 65535;
    Rng rng(3);
    Tensor t(6, 9, 1);
    for (double& v : t.data()) v = static_cast<double>(rng.below(static_cast<std::uint64_t>(maxval) + 1)) / maxval;
    t.at(0, 0, 0) = 0.0;
    t.at(0, 0, 1) = 1.0;
    const auto p = scratch("g" + std::to_string(bits) + ".pgm");
    write_pnm(p, t, bits, ValueMapping{0.0, 1.0});
    CHECK(std::filesystem::exists(sidecar_path(p)));
    const Tensor r = read_pnm(p);
    REQUIRE(r.same_shape(t));
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(r.data()[i] == t.data()[i]);
  }
}

TEST_CASE("pixmaps with an automatic mapping keep values to quantization", "[io]") {
  const Tensor t = random_tensor(4, 5, 3, 4);
  const auto p = scratch("c.ppm");
  write_pnm(p, t, 16);
  const Tensor r = read_pnm(p);
  REQUIRE(r.same_shape(t));
  const ValueMapping m = auto_mapping(t);
  for (std::size_t i = 0; i < t.size(); ++i) CHECK_THAT(r.data()[i], WithinAbs(t.data()[i], m.scale / 65535.0));
  CHECK_THROWS_AS(write_pnm(p, random_tensor(2, 2, 2, 5), 8), InvalidArgument);
  CHECK_THROWS_AS(write_pnm(p, t, 12), InvalidArgument);
  const auto q = scratch("bad.pgm");
  io::write_text_atomic(q, "P5\n4 4\n255\nab");
  CHECK_THROWS_AS(read_pnm(q), FormatError);
  io::write_text_atomic(q, "P2\n1 1\n255\n0");
  CHECK_THROWS_AS(read_pnm(q), FormatError);
}

namespace {

MultiNetConfig small_cfg() {
  MultiNetConfig m;
  m.arch.widths = {1, 3, 4, 2};
  m.arch.depthwise_blocks = 1;
  m.arch.zero_order_higher = true;
  m.lambda = 1.5;
  m.channel_sigmas = channel_initial_scales(0.7, m.lambda, 3);
  m.pooling = ScalePooling::LogSumExp;
  return m;
}

}  // namespace

TEST_CASE("checkpoints round-trip", "[io]") {
  const MultiNetConfig cfg = small_cfg();
  NetworkParams p = zero_params(cfg.arch);
  Rng rng(6);
  he_uniform_init(p, rng);
  p.first_bn.running_mean[1] = 0.25;
  const io::Bytes b = encode_checkpoint(p, cfg, Json{{"note", "x"}});
  const Checkpoint ck = decode_checkpoint(b);
  CHECK(ck.config.channel_sigmas == cfg.channel_sigmas);
  CHECK(ck.config.arch.widths == cfg.arch.widths);
  CHECK(ck.config.pooling == cfg.pooling);
  CHECK(ck.header.at("extra").at("note") == "x");
  CHECK(ck.header.at("alpha_order").size() == static_cast<std::size_t>(cfg.arch.effective_layers()));
  std::vector<double> x, y;
  visit_parameters(p, [&](ParamFamily, std::span<const double> s) { x.insert(x.end(), s.begin(), s.end()); });
  visit_parameters(ck.params, [&](ParamFamily, std::span<const double> s) { y.insert(y.end(), s.begin(), s.end()); });
  CHECK(x == y);
  CHECK(ck.params.first_bn.running_mean[1] == 0.25);
  CHECK(encode_checkpoint(ck.params, ck.config, Json{{"note", "x"}}) == b);
}

TEST_CASE("checkpoint decoding rejects damage", "[io]") {
  const MultiNetConfig cfg = small_cfg();
  const io::Bytes b = encode_checkpoint(zero_params(cfg.arch), cfg);
  io::Bytes bad = b;
  bad[1] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad), FormatError);
  CHECK_THROWS_AS(decode_checkpoint(io::Bytes(b.begin(), b.end() - 8)), FormatError);
  io::Bytes extra = b;
  extra.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(extra), FormatError);
  io::Bytes hdr = b;
  hdr[14] = '!';  // inside the JSON header
  CHECK_THROWS_AS(decode_checkpoint(hdr), FormatError);
}

TEST_CASE("experiment configs parse and print back", "[config]") {
  const std::string text = R"(# toy
name = toy
number_of_scale_channels = 6
initial_scale_min = 0.35355339059327379
initial_scale_ratio = 1.4142135623730951
relative_scale_ratio = 1.3
intermediate_feature_channels = 1-8-8-8-4
spatial_selection_method = centre
scale_pooling = max
zeroth_order_term = without
input_image_size = 1x32x32
number_of_epochs = 4
batch_size = 16
initial_learning_rate = 0.01
weight_decay = 0.025
scale_channel_dropout_factor = 0.2
label_smoothing = 0.1
first_stage_epochs = 2
second_stage_epochs = 2
)";
  const ExperimentConfig c = parse_config(text);
  CHECK(c.name == "toy");
  CHECK(c.net.num_channels() == 6);
  CHECK(c.net.arch.widths == std::vector<int>{1, 8, 8, 8, 4});
  CHECK(c.net.pooling == ScalePooling::Max);
  CHECK_THAT(c.net.channel_sigmas.back(), WithinAbs(std::pow(2.0, -1.5) * std::pow(std::sqrt(2.0), 5), 1e-12));
  CHECK(c.train.channel_dropout_q == 0.2);
  CHECK(c.stage_config(1).channel_dropout_q == 0.0);
  CHECK(c.stage_config(2).lr_init == 0.005);
  CHECK(c.single_channel().channel_sigmas == std::vector<double>{1.0});

  const ExperimentConfig d = parse_config(config_text(c));
  CHECK(config_text(d) == config_text(c));
  CHECK(d.net.channel_sigmas == c.net.channel_sigmas);

  CHECK_THROWS_AS(parse_config("colour = red\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("batch_size\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("batch_size = many\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("input_image_size = 3x32x32\n"), InvalidArgument);
  CHECK_THROWS_AS(parse_config("scale_pooling = median\n"), InvalidArgument);
}

namespace {

// Learnable values of a standard (not depthwise) network from the width list:
// jet coefficients, batch-norm scale and shift, skip projections, class bias.
std::size_t hand_parameter_count(const std::vector<std::size_t>& w, std::size_t a_first, std::size_t a_rest) {
  const std::size_t Z = w.size() - 1;
  std::size_t n = w[1] * w[0] * a_first + 2 * w[1];
  for (std::size_t k = 2; k + 1 <= Z; ++k) {
    const std::size_t in = w[k - 1], out = w[k];
    n += in * in * a_rest + 2 * in + out * in * a_rest + 2 * out;
    if (in != out) n += out * in + 2 * out;
  }
  return n + w[Z] * w[Z - 1] * a_rest + w[Z];
}

}  // namespace

TEST_CASE("shipped presets parse and have the expected size", "[config]") {
  struct Row {
    const char* file;
    std::vector<std::size_t> widths;
    std::size_t a_rest;
    std::size_t frozen;
  };
  const std::vector<Row> rows{
      {"toy.cfg", {1, 8, 8, 8, 4}, 5, 1564},
      {"fashion_mnist.cfg", {1, 48, 24, 32, 32, 48, 48, 64, 64, 128, 10}, 5, 223018},
      {"cifar10.cfg", {3, 48, 48, 64, 64, 64, 192, 192, 192, 256, 10}, 5, 1464154},
      {"stl10.cfg", {3, 48, 48, 64, 64, 128, 128, 192, 192, 256, 10}, 6, 1689946},
  };
  for (const auto& r : rows) {
    INFO(r.file);
    const ExperimentConfig c = load_config(std::filesystem::path(GDRES_SOURCE_DIR) / "presets" / r.file);
    CHECK(c.net.num_channels() == 6);
    CHECK_THAT(c.net.channel_sigmas.front(), WithinRel(std::pow(2.0, -1.5), 1e-12));
    CHECK_THAT(c.net.channel_sigmas.back(), WithinRel(2.0, 1e-12));
    CHECK(c.net.arch.effective_layers() == static_cast<int>(r.widths.size()) - 1);
    const std::size_t count = parameter_count(zero_params(c.net.arch));
    CHECK(hand_parameter_count(r.widths, 5, r.a_rest) == r.frozen);
    CHECK(count == r.frozen);
    CHECK(config_text(parse_config(config_text(c))) == config_text(c));
  }
}

TEST_CASE("spearman correlation", "[report]") {
  CHECK_THAT(spearman({1, 2, 3, 4}, {10, 20, 30, 40}), WithinAbs(1.0, 1e-15));
  CHECK_THAT(spearman({1, 2, 3, 4}, {4, 3, 2, 1}), WithinAbs(-1.0, 1e-15));
  CHECK_THAT(spearman({1, 2, 3, 4, 5}, {1, 4, 9, 16, 100}), WithinAbs(1.0, 1e-15));
  // Ties take average ranks: ranks (1.5, 1.5, 3) against (1, 2, 3).
  CHECK_THAT(spearman({0, 0, 1}, {1, 2, 3}), WithinAbs(std::sqrt(0.75), 1e-12));
  CHECK(spearman({1, 1, 1}, {1, 2, 3}) == 0.0);
  CHECK_THROWS_AS(spearman({1}, {1}), ShapeMismatch);
}

TEST_CASE("channel contributions and histograms", "[report]") {
  Prediction p;
  p.label = 1;
  p.per_channel = {{0.0, 1.0}, {0.0, 1.0 + std::log(3.0)}};
  auto w = channel_contributions(p, ScalePooling::Max);
  CHECK_THAT(w[0], WithinAbs(0.25, 1e-15));
  CHECK_THAT(w[1], WithinAbs(0.75, 1e-15));
  p.per_channel = {{0.0, 1.0}, {0.0, 3.0}};
  w = channel_contributions(p, ScalePooling::Average);
  CHECK_THAT(w[1], WithinAbs(0.75, 1e-15));
  p.per_channel = {{0.0, -1.0}, {0.0, -3.0}};
  CHECK(channel_contributions(p, ScalePooling::Average) == std::vector<double>{0.5, 0.5});

  ScaleSelectionHistogram h({0.5, 1.0, 2.0}, 3);
  h.add(0, {1.0, 0.0, 0.0});
  h.add(0, {0.5, 0.5, 0.0});
  h.add(2, {0.0, 0.2, 0.8});
  const auto n = h.normalized();
  CHECK_THAT(n[0][0] + n[0][1] + n[0][2], WithinAbs(1.0, 1e-15));
  CHECK_THAT(n[0][0], WithinAbs(0.75, 1e-15));
  CHECK(n[1] == std::vector<double>{0.0, 0.0, 0.0});
  CHECK_THAT(h.mean_channel_index()[2], WithinAbs(1.8, 1e-15));
  CHECK_THROWS_AS(h.add(0, {1.0}), ShapeMismatch);
}

TEST_CASE("evaluation report layout", "[report]") {
  struct Set {
    double factor;
    LabeledSet set;
  };
  std::vector<Set> sets(2);
  for (int i = 0; i < 2; ++i) {
    sets[i].factor = i == 0 ? 0.5 : 2.0;
    sets[i].set.num_classes = 2;
    sets[i].set.images.assign(4, Tensor(3, 3, 1));
    sets[i].set.labels = {0, 1, 0, 1};
  }
  int call = 0;
  const auto rep = evaluate_factors(sets, ScalePooling::Max, 2, [&](const std::vector<Tensor>& imgs) {
    std::vector<Prediction> out(imgs.size());
    for (auto& p : out) {
      p.label = 0;
      p.per_channel = call == 0 ? std::vector<std::vector<double>>{{5.0, 0.0}, {0.0, 0.0}}
                                : std::vector<std::vector<double>>{{0.0, 0.0}, {5.0, 0.0}};
    }
    ++call;
    return out;
  });
  REQUIRE(rep.factors.size() == 2);
  CHECK(rep.factors[0].accuracy == 0.5);
  CHECK(rep.factors[0].mean_channel < rep.factors[1].mean_channel);
  const Json j = rep.to_json();
  CHECK(j.at("schema") == "gdres.eval.v1");
  CHECK(j.at("factors")[1].at("histogram").size() == 2);
  CHECK(rep.accuracy_csv().rfind("factor,accuracy,mean_channel_index\n0.5,0.5,", 0) == 0);
  CHECK(rep.histogram_csv().rfind("factor,channel_0,channel_1\n", 0) == 0);
}
