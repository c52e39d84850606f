// SPDX-License-Identifier: Apache-2.0
//
// Rescaled test sets and dataset directories.
//
// Directory layout:
//   manifest.json
//   <split>/labels.csv          filename,class
//   <split>/NNNNNN.gdt          one GDTN1 tensor per sample
#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "gdres/binary_io.hpp"
#include "gdres/dataset.hpp"
#include "gdres/resample.hpp"
#include "gdres/serialize.hpp"
#include "gdres/tensor_io.hpp"
#include "gdres/toy.hpp"

namespace gdres {

struct SizeFactorGrid {
  std::vector<double> factors;

  /// 2^(k/4) for k = -4..4.
  static SizeFactorGrid default_grid() {
    SizeFactorGrid g;
    for (int k = -4; k <= 4; ++k) g.factors.push_back(std::pow(2.0, k / 4.0));
    return g;
  }

  void validate() const {
    if (factors.empty()) throw InvalidArgument("size factor grid is empty");
    for (std::size_t i = 0; i < factors.size(); ++i) {
      if (!(factors[i] > 0.0)) throw InvalidArgument("size factors must be positive");
      if (i > 0 && !(factors[i] > factors[i - 1])) throw InvalidArgument("size factors must increase");
    }
  }
};

struct RescaledSet {
  double factor = 1.0;
  LabeledSet set;
};

/// One copy of `base` per factor: bicubic rescale, then mirror extension
/// to the canvas.
inline std::vector<RescaledSet> build_rescaled_testsets(const LabeledSet& base, const SizeFactorGrid& grid,
                                                        int canvas_h, int canvas_w) {
  grid.validate();
  std::vector<RescaledSet> out;
  for (double f : grid.factors) {
    RescaledSet rs;
    rs.factor = f;
    rs.set.num_classes = base.num_classes;
    rs.set.labels = base.labels;
    for (const Tensor& img : base.images) {
      Tensor r = std::abs(f - 1.0) < 1e-15 ? img : bicubic_resize(img, f);
      if (r.height() > canvas_h || r.width() > canvas_w)
        throw InvalidArgument("build_rescaled_testsets: canvas smaller than rescaled image at factor " +
                              std::to_string(f));
      rs.set.images.push_back(mirror_extend(r, canvas_h, canvas_w));
    }
    out.push_back(std::move(rs));
  }
  return out;
}

/// Toy test sets re-rendered at every factor from the same per-sample draws.
inline std::vector<RescaledSet> toy_rescaled_testsets(const ToySpec& spec, const SizeFactorGrid& grid) {
  grid.validate();
  std::vector<RescaledSet> out;
  for (double f : grid.factors) {
    ToySpec s = spec;
    s.size_factor = f;
    out.push_back({f, gen_toy_dataset(s)});
  }
  return out;
}

inline std::string split_dir_name(double factor) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "test_f%.6f", factor);
  return buf;
}

/// Writes a split; returns the FNV-1a checksum over labels and tensor bytes.
inline std::uint64_t write_split(const std::filesystem::path& dir, const LabeledSet& set) {
  set.validate();
  std::filesystem::create_directories(dir);
  std::string labels = "filename,class\n";
  io::Bytes all;
  for (std::size_t i = 0; i < set.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.gdt", i);
    const io::Bytes b = encode_tensor(set.images[i]);
    io::write_file_atomic(dir / name, b);
    all.insert(all.end(), b.begin(), b.end());
    labels += std::string(name) + "," + std::to_string(set.labels[i]) + "\n";
  }
  io::write_text_atomic(dir / "labels.csv", labels);
  all.insert(all.end(), labels.begin(), labels.end());
  return io::fnv1a64(all);
}

/// Reads a split; when `checksum` is non-null it receives the recomputed
/// checksum.
inline LabeledSet read_split(const std::filesystem::path& dir, int num_classes, std::uint64_t* checksum = nullptr) {
  std::istringstream in(io::read_text(dir / "labels.csv"));
  std::string line;
  if (!std::getline(in, line) || line != "filename,class") throw FormatError("labels.csv: missing header");
  LabeledSet set;
  set.num_classes = num_classes;
  io::Bytes all;
  std::string labels = "filename,class\n";
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw FormatError("labels.csv: malformed row '" + line + "'");
    const io::Bytes b = io::read_file(dir / line.substr(0, comma));
    set.images.push_back(decode_tensor(b));
    set.labels.push_back(std::stoi(line.substr(comma + 1)));
    all.insert(all.end(), b.begin(), b.end());
    labels += line + "\n";
  }
  set.validate();
  if (checksum) {
    all.insert(all.end(), labels.begin(), labels.end());
    *checksum = io::fnv1a64(all);
  }
  return set;
}

inline Json toy_spec_json(const ToySpec& s) {
  return Json{{"num_classes", s.num_classes}, {"samples_per_class", s.samples_per_class},
              {"base_size", s.base_size},     {"canvas", {s.canvas_h, s.canvas_w}},
              {"jitter", s.jitter},           {"size_jitter", s.size_jitter},
              {"contrast", {s.contrast_min, s.contrast_max}},
              {"background_range", s.background_range},
              {"noise", s.noise},             {"supersample", s.supersample},
              {"seed", s.seed}};
}

/// Writes train, optional val and the test splits, then manifest.json.
/// Returns the manifest.
inline Json write_dataset(const std::filesystem::path& dir, const LabeledSet& train, const LabeledSet* val,
                          const std::vector<RescaledSet>& tests, const Json& source = Json::object()) {
  auto entry = [&](const std::string& name, const LabeledSet& s) {
    const std::uint64_t sum = write_split(dir / name, s);
    return Json{{"dir", name}, {"count", s.size()}, {"checksum", io::hex64(sum)}};
  };
  Json m{{"format", "gdres.dataset.v1"}, {"num_classes", train.num_classes}, {"source", source}};
  m["train"] = entry("train", train);
  if (val) m["val"] = entry("val", *val);
  m["tests"] = Json::array();
  for (const RescaledSet& t : tests) {
    if (t.set.num_classes != train.num_classes) throw InvalidArgument("write_dataset: class count differs across splits");
    Json e = entry(split_dir_name(t.factor), t.set);
    e["factor"] = t.factor;
    if (!t.set.empty()) e["canvas"] = {t.set.images[0].height(), t.set.images[0].width()};
    m["tests"].push_back(e);
  }
  io::write_text_atomic(dir / "manifest.json", m.dump(2) + "\n");
  return m;
}

struct LoadedDataset {
  Json manifest;
  LabeledSet train;
  LabeledSet val;
  std::vector<RescaledSet> tests;
};

/// Loads every split listed in `dir`/manifest.json and verifies checksums.
inline LoadedDataset load_dataset(const std::filesystem::path& dir, bool load_tests = true) {
  LoadedDataset d;
  try {
    d.manifest = Json::parse(io::read_text(dir / "manifest.json"));
  } catch (const Json::exception& e) {
    throw FormatError(std::string("manifest.json: ") + e.what());
  }
  const int K = d.manifest.at("num_classes").get<int>();
  auto load = [&](const Json& entry) {
    std::uint64_t sum = 0;
    LabeledSet s = read_split(dir / entry.at("dir").get<std::string>(), K, &sum);
    if (io::hex64(sum) != entry.at("checksum").get<std::string>())
      throw FormatError("checksum mismatch in split " + entry.at("dir").get<std::string>());
    return s;
  };
  d.train = load(d.manifest.at("train"));
  if (d.manifest.contains("val")) d.val = load(d.manifest.at("val"));
  if (load_tests)
    for (const Json& t : d.manifest.at("tests")) d.tests.push_back({t.at("factor").get<double>(), load(t)});
  return d;
}

}  // namespace gdres
