// SPDX-License-Identifier: Apache-2.0
#include <cstdio>
#include <sstream>

#include "commands.hpp"

namespace gdres::cli {

namespace {

SizeFactorGrid parse_factors(const std::string& text) {
  if (text == "default") return SizeFactorGrid::default_grid();
  if (text == "none") return {};
  SizeFactorGrid g;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      g.factors.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw InvalidArgument("--factors: cannot parse '" + item + "'");
    }
  }
  g.validate();
  return g;
}

struct GenOptions {
  std::filesystem::path out;
  bool force = false;
  bool toy = false;
  std::filesystem::path from;
  int num_classes = 0;
  int canvas = 0;
  std::string factors = "default";
  ToySpec spec;
  int val_per_class = 0;
  int test_per_class = 50;
};

void run_gen(const GenOptions& o) {
  if (o.toy == !o.from.empty()) throw InvalidArgument("gen-dataset: give exactly one of --toy or --from");
  const SizeFactorGrid grid = parse_factors(o.factors);
  prepare_output_dir(o.out, o.force);

  if (o.toy) {
    const LabeledSet train = gen_toy_dataset(o.spec);
    ToySpec vs = o.spec;
    vs.samples_per_class = o.val_per_class;
    vs.seed = o.spec.seed + 500;
    LabeledSet val;
    if (o.val_per_class > 0) val = gen_toy_dataset(vs);
    ToySpec ts = o.spec;
    ts.samples_per_class = o.test_per_class;
    ts.seed = o.spec.seed + 1000;
    std::vector<RescaledSet> tests;
    if (!grid.factors.empty()) tests = toy_rescaled_testsets(ts, grid);
    Json source{{"generator", "toy"}, {"spec", toy_spec_json(o.spec)}, {"val_seed", vs.seed},
                {"test_seed", ts.seed},  {"test_per_class", o.test_per_class}, {"factors", grid.factors}};
    write_dataset(o.out, train, o.val_per_class > 0 ? &val : nullptr, tests, source);
    log("wrote " + std::to_string(train.size()) + " training images and " + std::to_string(tests.size()) +
        " test sets to " + o.out.string());
    return;
  }

  // Rescaled copies of an existing split (tensor files plus labels.csv).
  if (o.num_classes < 2) throw InvalidArgument("gen-dataset: --from needs --classes");
  const LabeledSet base = read_split(o.from, o.num_classes);
  if (base.empty()) throw InvalidArgument("gen-dataset: split " + o.from.string() + " is empty");
  const int canvas = o.canvas > 0 ? o.canvas : 2 * base.images.front().height();
  const auto tests = build_rescaled_testsets(base, grid, canvas, canvas);
  Json source{{"generator", "rescale"}, {"from", o.from.string()}, {"canvas", canvas}, {"factors", grid.factors}};
  write_dataset(o.out, base, nullptr, tests, source);
  log("wrote " + std::to_string(tests.size()) + " rescaled test sets to " + o.out.string());
}

}  // namespace

void add_gen_dataset(CLI::App& app) {
  auto o = std::make_shared<GenOptions>();
  CLI::App* sub = app.add_subcommand("gen-dataset", "Generate a dataset directory with rescaled test sets");
  sub->add_option("--out", o->out, "Output directory")->required();
  sub->add_flag("--force", o->force, "Replace a non-empty output directory");
  sub->add_flag("--toy", o->toy, "Render the synthetic shape dataset");
  sub->add_option("--from", o->from, "Existing split directory to rescale instead")->check(CLI::ExistingDirectory);
  sub->add_option("--classes", o->spec.num_classes, "Number of classes")->capture_default_str();
  sub->add_option("--per-class", o->spec.samples_per_class, "Training samples per class")->capture_default_str();
  sub->add_option("--val-per-class", o->val_per_class, "Validation samples per class")->capture_default_str();
  sub->add_option("--test-per-class", o->test_per_class, "Test samples per class and factor")->capture_default_str();
  sub->add_option("--base-size", o->spec.base_size, "Object radius in pixels at factor 1")->capture_default_str();
  sub->add_option("--canvas", o->canvas, "Square canvas size in pixels");
  sub->add_option("--jitter", o->spec.jitter, "Centre offset range in pixels")->capture_default_str();
  sub->add_option("--noise", o->spec.noise, "Additive noise standard deviation")->capture_default_str();
  sub->add_option("--seed", o->spec.seed, "Random seed")->capture_default_str();
  sub->add_option("--factors", o->factors, "Size factors: 'default', 'none' or a comma list")->capture_default_str();
  sub->callback([o] {
    if (o->canvas > 0) o->spec.canvas_h = o->spec.canvas_w = o->canvas;
    o->num_classes = o->spec.num_classes;
    run_gen(*o);
  });
}

}  // namespace gdres::cli
