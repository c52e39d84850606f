// SPDX-License-Identifier: Apache-2.0
//
// Checkpoint format.
//
//   bytes 0..5   "GDJRN1"
//   u64 LE       length L of the JSON header
//   L bytes      JSON header: config echo, jet index order, array manifest
//   f64 LE ...   arrays in manifest order
//
// Requires nlohmann/json.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "gdres/binary_io.hpp"
#include "gdres/net_config.hpp"
#include "gdres/params.hpp"

namespace gdres {

using Json = nlohmann::json;

inline constexpr char kCheckpointMagic[] = "GDJRN1";
inline constexpr int kCheckpointVersion = 1;

inline Json to_json(const ArchConfig& a) {
  return Json{{"widths", a.widths},
              {"jet_order", a.jet_order},
              {"zero_order_higher", a.zero_order_higher},
              {"depthwise_blocks", a.depthwise_blocks},
              {"ratio", a.ratio},
              {"epsilon", a.epsilon},
              {"selection", to_string(a.selection)},
              {"boundary", a.boundary == Boundary::Mirror ? "mirror" : "zero"},
              {"bn_eps", a.bn_eps},
              {"bn_momentum", a.bn_momentum}};
}

inline SpatialSelection parse_selection(const std::string& s) {
  if (s == "centre" || s == "center") return SpatialSelection::Centre;
  if (s == "spatmax") return SpatialSelection::SpatMax;
  throw InvalidArgument("unknown spatial selection '" + s + "'");
}

inline ScalePooling parse_pooling(const std::string& s) {
  if (s == "max") return ScalePooling::Max;
  if (s == "logsumexp" || s == "lse") return ScalePooling::LogSumExp;
  if (s == "average" || s == "avg") return ScalePooling::Average;
  throw InvalidArgument("unknown scale pooling '" + s + "'");
}

inline Boundary parse_boundary(const std::string& s) {
  if (s == "mirror") return Boundary::Mirror;
  if (s == "zero") return Boundary::Zero;
  throw InvalidArgument("unknown boundary policy '" + s + "'");
}

inline ArchConfig arch_from_json(const Json& j) {
  ArchConfig a;
  a.widths = j.at("widths").get<std::vector<int>>();
  a.jet_order = j.at("jet_order").get<int>();
  a.zero_order_higher = j.at("zero_order_higher").get<bool>();
  a.depthwise_blocks = j.at("depthwise_blocks").get<int>();
  a.ratio = j.at("ratio").get<double>();
  a.epsilon = j.at("epsilon").get<double>();
  a.selection = parse_selection(j.at("selection").get<std::string>());
  a.boundary = parse_boundary(j.at("boundary").get<std::string>());
  a.bn_eps = j.at("bn_eps").get<double>();
  a.bn_momentum = j.at("bn_momentum").get<double>();
  a.validate();
  return a;
}

inline Json to_json(const MultiNetConfig& m) {
  return Json{{"arch", to_json(m.arch)},
              {"channel_sigmas", m.channel_sigmas},
              {"lambda", m.lambda},
              {"pooling", to_string(m.pooling)}};
}

inline MultiNetConfig multi_from_json(const Json& j) {
  MultiNetConfig m;
  m.arch = arch_from_json(j.at("arch"));
  m.channel_sigmas = j.at("channel_sigmas").get<std::vector<double>>();
  m.lambda = j.at("lambda").get<double>();
  m.pooling = parse_pooling(j.at("pooling").get<std::string>());
  m.validate();
  return m;
}

struct NamedArray {
  std::string name;
  std::string family;
  std::vector<int> shape;
  std::vector<double>* data;
};

namespace detail {

inline void collect_jet(const std::string& prefix, JetWeights& w, std::vector<NamedArray>& out) {
  std::visit(
      [&](auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, JetLayerWeights>) {
          out.push_back({prefix + ".coeffs", "jet_coeff", {v.out_channels, v.in_channels, v.num_indices}, &v.coeffs});
        } else {
          out.push_back({prefix + ".depth", "depth_coeff", {v.in_channels, v.num_indices}, &v.depth_coeffs});
          out.push_back({prefix + ".point", "point_weight", {v.out_channels, v.in_channels}, &v.point_weights});
        }
        if (!v.bias.empty()) out.push_back({prefix + ".bias", "bias", {v.out_channels}, &v.bias});
      },
      w);
}

inline void collect_bn(const std::string& prefix, BatchNormState& bn, std::vector<NamedArray>& out) {
  const int c = bn.channels();
  out.push_back({prefix + ".scale", "bn_scale", {c}, &bn.scale});
  out.push_back({prefix + ".shift", "bn_shift", {c}, &bn.shift});
  out.push_back({prefix + ".running_mean", "bn_running_mean", {c}, &bn.running_mean});
  out.push_back({prefix + ".running_var", "bn_running_var", {c}, &bn.running_var});
}

}  // namespace detail

/// Every stored array, learnable or not, in file order.
inline std::vector<NamedArray> named_arrays(NetworkParams& p) {
  std::vector<NamedArray> out;
  detail::collect_jet("first", p.first, out);
  detail::collect_bn("first_bn", p.first_bn, out);
  for (std::size_t i = 0; i < p.blocks.size(); ++i) {
    const std::string b = "block" + std::to_string(i + 2);
    auto& bp = p.blocks[i];
    detail::collect_jet(b + ".conv1", bp.conv1, out);
    detail::collect_bn(b + ".bn1", bp.bn1, out);
    detail::collect_jet(b + ".conv2", bp.conv2, out);
    detail::collect_bn(b + ".bn2", bp.bn2, out);
    if (bp.projection) {
      auto& pr = *bp.projection;
      out.push_back({b + ".proj", "projection", {pr.out_channels, pr.in_channels}, &pr.weights});
      detail::collect_bn(b + ".proj_bn", pr.bn, out);
    }
  }
  detail::collect_jet("last", p.last, out);
  return out;
}

inline Json jet_order_json(const ArchConfig& arch) {
  Json layers = Json::array();
  for (int k = 1; k <= arch.effective_layers(); ++k) {
    Json idx = Json::array();
    for (const MultiIndex& a : arch.spec(k, 1.0).indices()) idx.push_back({a.a1, a.a2});
    layers.push_back({{"effective_layer", k}, {"alpha", idx}});
  }
  return layers;
}

/// Encodes parameters with the given network configuration as header echo.
inline io::Bytes encode_checkpoint(const NetworkParams& params, const MultiNetConfig& cfg, const Json& extra = {}) {
  NetworkParams copy = params;
  auto arrays = named_arrays(copy);
  Json manifest = Json::array();
  for (const auto& a : arrays)
    manifest.push_back({{"name", a.name}, {"family", a.family}, {"shape", a.shape}, {"count", a.data->size()}});
  Json header{{"format", kCheckpointMagic},
              {"version", kCheckpointVersion},
              {"byte_order", "little"},
              {"element", "f64"},
              {"config", to_json(cfg)},
              {"alpha_order", jet_order_json(cfg.arch)},
              {"arrays", manifest}};
  if (!extra.is_null()) header["extra"] = extra;
  const std::string text = header.dump();
  io::Bytes out;
  io::put_str(out, kCheckpointMagic);
  io::put_u64(out, text.size());
  io::put_str(out, text);
  for (const auto& a : arrays)
    for (double v : *a.data) io::put_f64(out, v);
  return out;
}

struct Checkpoint {
  MultiNetConfig config;
  NetworkParams params;
  Json header;
};

/// Decodes and validates a checkpoint against the configuration it carries.
inline Checkpoint decode_checkpoint(const io::Bytes& bytes) {
  io::Reader r(bytes);
  if (bytes.size() < 6 || r.str(6) != kCheckpointMagic) throw FormatError("not a GDJRN1 checkpoint");
  const std::uint64_t len = r.u64();
  if (len > r.remaining()) throw FormatError("checkpoint header length exceeds file size");
  Json header;
  try {
    header = Json::parse(r.str(static_cast<std::size_t>(len)));
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint header: ") + e.what());
  }
  if (header.value("version", 0) != kCheckpointVersion) throw FormatError("unsupported checkpoint version");
  Checkpoint ck;
  try {
    ck.config = multi_from_json(header.at("config"));
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint config: ") + e.what());
  }
  ck.params = zero_params(ck.config.arch);
  auto arrays = named_arrays(ck.params);
  const Json& manifest = header.at("arrays");
  if (manifest.size() != arrays.size()) throw ShapeMismatch("checkpoint array count does not match config");
  for (std::size_t i = 0; i < arrays.size(); ++i) {
    const Json& m = manifest[i];
    if (m.at("name").get<std::string>() != arrays[i].name ||
        m.at("shape").get<std::vector<int>>() != arrays[i].shape ||
        m.at("count").get<std::size_t>() != arrays[i].data->size())
      throw ShapeMismatch("checkpoint array '" + m.at("name").get<std::string>() + "' does not match config");
    for (double& v : *arrays[i].data) v = r.f64();
  }
  if (r.remaining() != 0) throw FormatError("trailing bytes after checkpoint arrays");
  ck.header = std::move(header);
  return ck;
}

inline void save_checkpoint(const std::filesystem::path& path, const NetworkParams& params,
                            const MultiNetConfig& cfg, const Json& extra = {}) {
  io::write_file_atomic(path, encode_checkpoint(params, cfg, extra));
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return decode_checkpoint(io::read_file(path));
}

}  // namespace gdres
