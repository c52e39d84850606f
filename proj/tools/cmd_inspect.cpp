// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "commands.hpp"

namespace gdres::cli {

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// covariance-check

struct CovOptions {
  CovarianceOptions c;
  std::filesystem::path out;
};

void run_covariance(const CovOptions& o) {
  const CovarianceReport r = run_covariance_checks(o.c);
  for (const auto& s : r.sections)
    std::printf("%-32s %-4s  error %.3e  tolerance %.1e\n", s.name.c_str(), s.passed ? "ok" : "FAIL", s.error,
                s.tolerance);
  if (!o.out.empty()) {
    prepare_output_file(o.out);
    io::write_text_atomic(o.out, r.to_json().dump(2) + "\n");
  }
  if (!r.passed()) {
    int failed = 0;
    for (const auto& s : r.sections) failed += s.passed ? 0 : 1;
    throw CheckFailed(std::to_string(failed) + " of " + std::to_string(r.sections.size()) + " sections failed");
  }
}

// kernel-dump

struct KernelOptions {
  double sigma = 1.0;
  double epsilon = 0.005;
  int order = 0;
  bool normalized = false;
  std::filesystem::path out;
};

void run_kernel_dump(const KernelOptions& o) {
  const DiscreteKernel1D k = disc_gauss_kernel(o.sigma, o.epsilon);
  std::vector<double> taps = detail::convolve_taps(k.taps, difference_stencil(o.order));
  if (o.normalized && o.order > 0)
    for (double& t : taps) t *= std::pow(o.sigma, o.order);
  const int r = static_cast<int>(taps.size() / 2);
  std::ostringstream csv;
  csv.precision(17);
  csv << "n,tap\n";
  for (int n = -r; n <= r; ++n) csv << n << "," << taps[static_cast<std::size_t>(n + r)] << "\n";
  if (o.out.empty())
    std::cout << csv.str();
  else {
    prepare_output_file(o.out);
    io::write_text_atomic(o.out, csv.str());
  }
  log("sigma " + fmt("%g", o.sigma) + "  radius " + std::to_string(k.radius) + "  tail mass " +
      fmt("%.3e", k.tail_mass));
}

// export

struct ExportOptions {
  std::filesystem::path checkpoint;
  std::string what = "filters";
  int layer = 1;
  int conv = 1;
  std::optional<int> channel;
  std::filesystem::path image;
  std::optional<int> feature;
  int bits = 16;
  std::filesystem::path out;
  bool force = false;
};

const JetWeights& layer_weights(const NetworkParams& p, const ArchConfig& arch, int layer, int conv) {
  const int Z = arch.effective_layers();
  if (layer < 1 || layer > Z)
    throw InvalidArgument("--layer must lie in 1.." + std::to_string(Z));
  const bool block = layer > 1 && layer < Z;
  if (!block && conv != 1) throw InvalidArgument("--conv 2 exists only in residual blocks");
  if (conv != 1 && conv != 2) throw InvalidArgument("--conv must be 1 or 2");
  if (layer == 1) return p.first;
  if (layer == Z) return p.last;
  const BlockParams& b = p.blocks[static_cast<std::size_t>(layer - 2)];
  return conv == 1 ? b.conv1 : b.conv2;
}

std::vector<int> channel_list(const std::optional<int>& pick, int count, const std::string& flag) {
  if (pick) {
    if (*pick < 0 || *pick >= count)
      throw InvalidArgument(flag + " must lie in 0.." + std::to_string(count - 1));
    return {*pick};
  }
  std::vector<int> all(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) all[static_cast<std::size_t>(i)] = i;
  return all;
}

void export_filters(const Checkpoint& ck, const ExportOptions& o) {
  const MultiNetConfig& cfg = ck.config;
  const JetWeights& w = layer_weights(ck.params, cfg.arch, o.layer, o.conv);
  const auto shape = std::visit([](const auto& x) { return std::pair{x.out_channels, x.in_channels}; }, w);
  std::ostringstream csv;
  csv.precision(17);
  csv << "scale_channel,sigma,out,in,radius,sum,abs_max,file\n";
  for (int n : channel_list(o.channel, cfg.num_channels(), "--channel")) {
    const JetSpec spec = cfg.arch.spec(o.layer, cfg.channel_sigmas[static_cast<std::size_t>(n)]);
    for (int co = 0; co < shape.first; ++co)
      for (int ci = 0; ci < shape.second; ++ci) {
        const Tensor k = std::visit([&](const auto& x) { return effective_kernel(x, spec, co, ci); }, w);
        double sum = 0.0, amax = 0.0;
        for (double v : k.data()) {
          sum += v;
          amax = std::max(amax, std::abs(v));
        }
        const std::string name = "filter_l" + std::to_string(o.layer) + "c" + std::to_string(o.conv) + "_s" +
                                 std::to_string(n) + "_o" + std::to_string(co) + "_i" + std::to_string(ci) + ".pgm";
        write_pnm(o.out / name, k, o.bits);
        csv << n << "," << spec.sigma << "," << co << "," << ci << "," << k.height() / 2 << "," << sum << "," << amax
            << "," << name << "\n";
      }
  }
  io::write_text_atomic(o.out / "filters.csv", csv.str());
}

void export_activations(const Checkpoint& ck, const ExportOptions& o) {
  if (o.image.empty()) throw InvalidArgument("--what activations needs --image");
  const MultiNetConfig& cfg = ck.config;
  const ArchConfig& arch = cfg.arch;
  const int Z = arch.effective_layers();
  if (o.layer < 1 || o.layer > Z) throw InvalidArgument("--layer must lie in 1.." + std::to_string(Z));
  const Tensor img = read_image(o.image);
  if (img.channels() != arch.input_channels())
    throw ShapeMismatch("image has " + std::to_string(img.channels()) + " channels, the network expects " +
                        std::to_string(arch.input_channels()));

  const std::vector<int> chans = channel_list(o.channel, cfg.num_channels(), "--channel");
  std::vector<Tensor> items;
  std::vector<double> sigmas;
  for (int n : chans) {
    items.push_back(img);
    sigmas.push_back(cfg.channel_sigmas[static_cast<std::size_t>(n)]);
  }
  GradTape tape;
  forward_batch(items, sigmas, arch, ck.params, &tape);
  const std::vector<Tensor>& maps = o.layer == 1   ? tape.first_out
                                    : o.layer == Z ? tape.class_maps
                                                   : tape.blocks[static_cast<std::size_t>(o.layer - 2)].out;

  std::ostringstream csv;
  csv.precision(17);
  csv << "scale_channel,sigma0,feature,min,max,mean,file\n";
  for (std::size_t i = 0; i < chans.size(); ++i) {
    const Tensor& m = maps[i];
    for (int f : channel_list(o.feature, m.channels(), "--feature")) {
      const Tensor plane = extract_channel(m, f);
      const auto d = plane.data();
      const auto [lo, hi] = std::minmax_element(d.begin(), d.end());
      double mean = 0.0;
      for (double v : d) mean += v;
      mean /= static_cast<double>(d.size());
      const std::string name = "act_l" + std::to_string(o.layer) + "_s" + std::to_string(chans[i]) + "_f" +
                               std::to_string(f) + ".pgm";
      write_pnm(o.out / name, plane, o.bits);
      csv << chans[i] << "," << sigmas[i] << "," << f << "," << *lo << "," << *hi << "," << mean << "," << name
          << "\n";
    }
  }
  io::write_text_atomic(o.out / "activations.csv", csv.str());
}

void run_export(const ExportOptions& o) {
  const Checkpoint ck = load_checkpoint(o.checkpoint);
  prepare_output_dir(o.out, o.force);
  if (o.what == "filters")
    export_filters(ck, o);
  else
    export_activations(ck, o);
  log("wrote " + o.what + " to " + o.out.string());
}

}  // namespace

void add_covariance_check(CLI::App& app) {
  auto o = std::make_shared<CovOptions>();
  CLI::App* sub = app.add_subcommand("covariance-check", "Numerical scale-covariance checks on synthetic blobs");
  sub->add_option("--seed", o->c.seed, "Seed for random network weights")->capture_default_str();
  sub->add_option("--size", o->c.n, "Coarse grid size")->check(CLI::Range(9, 513))->capture_default_str();
  sub->add_option("--blob-sigma", o->c.blob_sigma, "Blob scale on the coarse grid")->capture_default_str();
  sub->add_option("--aspect", o->c.aspect, "Blob elongation along x1")->capture_default_str();
  sub->add_option("--sigma-min", o->c.sigma_min, "Smallest coarse scale checked")->capture_default_str();
  sub->add_option("--tol-response", o->c.tol_response, "Derivative response tolerance")->capture_default_str();
  sub->add_option("--tol-response-fine", o->c.tol_response_fine, "Tolerance at scale 1")->capture_default_str();
  sub->add_option("--tol-layer", o->c.tol_layer, "Jet layer and block tolerance")->capture_default_str();
  sub->add_option("--tol-channel", o->c.tol_channel, "Scale channel tolerance")->capture_default_str();
  sub->add_option("--out", o->out, "Write the report as JSON");
  sub->callback([o] { run_covariance(*o); });
}

void add_kernel_dump(CLI::App& app) {
  auto o = std::make_shared<KernelOptions>();
  CLI::App* sub = app.add_subcommand("kernel-dump", "Print discrete Gaussian (derivative) taps as CSV");
  sub->add_option("--sigma", o->sigma, "Scale")->required();
  sub->add_option("--epsilon", o->epsilon, "Truncation bound on the discarded mass")->capture_default_str();
  sub->add_option("--order", o->order, "Derivative order")->check(CLI::Range(0, 8))->capture_default_str();
  sub->add_flag("--normalized", o->normalized, "Multiply by sigma^order");
  sub->add_option("--out", o->out, "Output file (default stdout)");
  sub->callback([o] { run_kernel_dump(*o); });
}

void add_export(CLI::App& app) {
  auto o = std::make_shared<ExportOptions>();
  CLI::App* sub = app.add_subcommand("export", "Write effective filters or activation maps as PGM");
  sub->add_option("--checkpoint", o->checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  sub->add_option("--what", o->what, "filters or activations")
      ->check(CLI::IsMember({"filters", "activations"}))->capture_default_str();
  sub->add_option("--layer", o->layer, "Effective layer index, 1 is the first")->capture_default_str();
  sub->add_option("--conv", o->conv, "Layer within a residual block (1 or 2)")->capture_default_str();
  sub->add_option("--channel", o->channel, "Scale channel index (default all)");
  sub->add_option("--feature", o->feature, "Feature map index for activations (default all)");
  sub->add_option("--image", o->image, "Input image (.pgm, .ppm or tensor file)")->check(CLI::ExistingFile);
  sub->add_option("--bits", o->bits, "PGM sample depth")->check(CLI::IsMember({8, 16}))->capture_default_str();
  sub->add_option("--out", o->out, "Output directory")->required();
  sub->add_flag("--force", o->force, "Replace a non-empty output directory");
  sub->callback([o] { run_export(*o); });
}

}  // namespace gdres::cli
