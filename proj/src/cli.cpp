// Copyright 2026 The VNet Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vnet/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <iomanip>
#include <optional>
#include <sstream>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "vnet/error.hpp"
#include "vnet/io_util.hpp"
#include "vnet/metrics.hpp"
#include "vnet/network_config.hpp"
#include "vnet/trainer.hpp"

namespace vnet {

namespace {

struct GlobalOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::vector<std::string> overrides;
  std::string preset;
};

struct ResolvedConfig {
  NetworkConfig network;
  TrainConfig train;
};

// File first, then --set entries, then --seed.
KeyValues gather(const GlobalOptions& g) {
  KeyValues kv;
  if (!g.config_path.empty()) kv = KeyValues::load(g.config_path);
  for (const auto& o : g.overrides) kv.overlay(KeyValues::parse(o));
  if (g.seed) kv.set("seed", std::to_string(*g.seed));
  return kv;
}

ResolvedConfig resolve(const GlobalOptions& g, const std::string& default_preset) {
  KeyValues kv = gather(g);
  std::string preset = g.preset.empty() ? kv.get_string("preset").value_or(default_preset) : g.preset;
  std::set<std::string> known{"preset"};
  known.insert(NetworkConfig::keys().begin(), NetworkConfig::keys().end());
  known.insert(TrainConfig::keys().begin(), TrainConfig::keys().end());
  kv.reject_unknown(known);
  ResolvedConfig r;
  if (preset == "paper") {
    r.network = NetworkConfig::paper_default();
    r.train = TrainConfig::paper();
  } else if (preset == "desk") {
    r.network = NetworkConfig::desk_default();
    r.train = TrainConfig::desk();
  } else {
    throw InvalidArgument("preset must be paper or desk, got '" + preset + "'");
  }
  r.network = NetworkConfig::from_kv(kv, r.network);
  r.train = TrainConfig::from_kv(kv, r.train);
  return r;
}

void echo(std::ostream& out, const ResolvedConfig& c, bool with_train) {
  KeyValues kv;
  c.network.to_kv(kv);
  if (with_train) c.train.to_kv(kv);
  for (const auto& [k, v] : kv.entries()) out << "# " << k << "=" << v << "\n";
}

void echo_pairs(std::ostream& out, const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) out << "# " << k << "=" << v << "\n";
}

Spacing parse_xyz_spacing(const std::string& text) {
  const KeyValues kv = KeyValues::parse("spacing=" + text);
  const auto v = kv.get_doubles("spacing");
  if (v->size() != 3) throw InvalidArgument("expected X,Y,Z spacing in mm, got '" + text + "'");
  return Spacing{(*v)[2], (*v)[1], (*v)[0]};
}

std::string fmt(double v) { return format_real(v); }

struct GenerateOptions {
  std::string out_dir;
  std::string dims = "32,32,32";
  std::string spacing = "1,1,1";
  std::string shape = "sphere";
  std::string radii;
  double radius_fraction = 0.25;
  int count = 1;
  std::string prefix = "case";
  double center_jitter = 0.0;
  double radius_jitter = 0.0;
  double fg_mean = 1.0;
  double bg_mean = 0.0;
  double class_stddev = 0.1;
  double noise = 0.05;
};

int cmd_generate(const GenerateOptions& o, const GlobalOptions& g, std::ostream& out) {
  SyntheticSpec spec;
  spec.dims = parse_xyz_dims(o.dims);
  spec.spacing = parse_xyz_spacing(o.spacing);
  if (o.shape == "sphere") {
    spec.shape = ShapeKind::sphere;
  } else if (o.shape == "ellipsoid") {
    spec.shape = ShapeKind::ellipsoid;
  } else {
    throw InvalidArgument("shape must be sphere or ellipsoid, got '" + o.shape + "'");
  }
  spec.center_z = (spec.dims.d - 1) / 2.0;
  spec.center_y = (spec.dims.h - 1) / 2.0;
  spec.center_x = (spec.dims.w - 1) / 2.0;
  if (o.radii.empty()) {
    const double r = o.radius_fraction * std::min({spec.dims.d, spec.dims.h, spec.dims.w});
    spec.radius_z = spec.radius_y = spec.radius_x = r;
  } else {
    const Spacing r = parse_xyz_spacing(o.radii);
    spec.radius_z = r.z;
    spec.radius_y = r.y;
    spec.radius_x = r.x;
  }
  spec.foreground_mean = o.fg_mean;
  spec.background_mean = o.bg_mean;
  spec.foreground_stddev = spec.background_stddev = o.class_stddev;
  spec.noise_stddev = o.noise;
  spec.seed = g.seed.value_or(0);

  echo_pairs(out, {{"dims", format_xyz_dims(spec.dims)},
                   {"spacing", o.spacing},
                   {"shape", o.shape},
                   {"radii", fmt(spec.radius_x) + "," + fmt(spec.radius_y) + "," + fmt(spec.radius_z)},
                   {"count", std::to_string(o.count)},
                   {"center_jitter", fmt(o.center_jitter)},
                   {"radius_jitter", fmt(o.radius_jitter)},
                   {"fg_mean", fmt(o.fg_mean)},
                   {"bg_mean", fmt(o.bg_mean)},
                   {"class_stddev", fmt(o.class_stddev)},
                   {"noise", fmt(o.noise)},
                   {"seed", std::to_string(spec.seed)}});
  const auto specs = derive_specs(spec, o.count, o.center_jitter, o.radius_jitter);
  for (std::size_t i = 0; i < specs.size(); ++i) {
    auto [image, label] = generate_synthetic(specs[i]);
    std::ostringstream name;
    name << o.prefix << std::setw(3) << std::setfill('0') << i;
    const std::size_t fg = foreground_count(label);
    save_sample({name.str(), std::move(image), std::move(label)}, o.out_dir);
    out << name.str() << " foreground=" << fg << " fraction="
        << fmt(static_cast<double>(fg) / static_cast<double>(spec.dims.count())) << "\n";
  }
  return 0;
}

int cmd_rf_table(const GlobalOptions& g, std::ostream& out) {
  const ResolvedConfig c = resolve(g, "paper");
  echo(out, c, false);
  out << format_receptive_field_table(receptive_fields(c.network));
  return 0;
}

struct TrainCliOptions {
  std::string data_dir;
  std::string out_dir;
  std::string resume;
  int log_every = 10;
};

int cmd_train(const TrainCliOptions& o, const GlobalOptions& g, std::ostream& out) {
  const Dataset data = load_dataset(o.data_dir);
  std::optional<VNetModel> model;
  TrainConfig config;
  TrainRun run;
  if (!o.resume.empty()) {
    const std::filesystem::path history_path = std::filesystem::path(o.out_dir) / "history.csv";
    std::vector<HistoryRow> history;
    if (std::filesystem::exists(history_path)) history = parse_history(read_file(history_path));
    RestoredTraining restored = restore_checkpoint(load_checkpoint(o.resume), std::move(history));
    KeyValues kv = gather(g);
    for (const auto& k : NetworkConfig::keys()) {
      if (kv.has(k)) throw InvalidArgument("cannot change '" + k + "' when resuming");
    }
    std::set<std::string> known(TrainConfig::keys().begin(), TrainConfig::keys().end());
    known.insert("preset");
    kv.reject_unknown(known);
    config = TrainConfig::from_kv(kv, restored.config);
    model.emplace(std::move(restored.model));
    run = std::move(restored.run);
    echo(out, {model->config(), config}, true);
    out << "# resume=" << o.resume << " iteration=" << run.iteration << "\n";
  } else {
    const ResolvedConfig c = resolve(g, "desk");
    config = c.train;
    echo(out, c, true);
    model.emplace(VNetModel::build(c.network, config.seed));
  }
  out << "# parameters=" << model->parameter_count() << " volumes=" << data.size() << "\n";

  TrainOptions options;
  options.out_dir = o.out_dir;
  options.on_iteration = [&](const HistoryRow& r) {
    if (o.log_every > 0 && ((r.iteration + 1) % o.log_every == 0 || r.iteration + 1 == config.max_iterations)) {
      out << "iter " << r.iteration << " lr " << fmt(r.lr) << " loss " << fmt(r.loss)
          << " train_dice " << fmt(r.train_dice) << "\n";
      out.flush();
    }
  };
  train(data, *model, config, options, std::move(run));
  return 0;
}

struct InferOptions {
  std::string model;
  std::string in;
  std::string out;
  std::string prob;
};

int cmd_infer(const InferOptions& o, std::ostream& out) {
  const VNetModel model = load_model(o.model);
  echo(out, {model.config(), TrainConfig{}}, false);
  const SegmentationResult r = segment(model, load_volume(o.in));
  save_volume(r.mask, o.out);
  if (!o.prob.empty()) save_volume(r.probability, o.prob);
  out << "foreground=" << foreground_count(r.mask) << " seconds=" << fmt(r.elapsed.count()) << "\n";
  return 0;
}

struct EvaluateOptions {
  std::string model;
  std::string data;
  std::string report;
};

int cmd_evaluate(const EvaluateOptions& o, std::ostream& out) {
  const VNetModel model = load_model(o.model);
  echo(out, {model.config(), TrainConfig{}}, false);
  const MetricsReport report = evaluate(model, load_dataset(o.data));
  write_file_atomic(o.report, report.to_csv());
  out << "mean_dice=" << fmt(report.mean_dice) << " stddev_dice=" << fmt(report.stddev_dice)
      << " mean_hausdorff_mm=" << fmt(report.mean_hausdorff_mm)
      << " stddev_hausdorff_mm=" << fmt(report.stddev_hausdorff_mm)
      << " included=" << report.included << " excluded=" << report.excluded << "\n";
  return 0;
}

void add_config_flags(CLI::App* cmd, GlobalOptions& g) {
  cmd->add_option("--set", g.overrides, "Override a config entry, key=value (repeatable)");
  cmd->add_option("--preset", g.preset, "Base configuration: paper or desk");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Volumetric residual segmentation network: data, training, inference"};
  app.name("vnet");
  app.require_subcommand(1);
  GlobalOptions g;
  app.add_option("--config", g.config_path, "Flat key=value configuration file")
      ->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "Random seed (overrides the config)");
  app.add_option("--threads", g.threads, "Worker threads for convolutions (0 = runtime default)")
      ->check(CLI::NonNegativeNumber);

  GenerateOptions gen;
  CLI::App* generate = app.add_subcommand("generate", "Write synthetic image/label pairs");
  generate->add_option("--out", gen.out_dir, "Output directory")->required();
  generate->add_option("--dims", gen.dims, "Voxel counts X,Y,Z")->capture_default_str();
  generate->add_option("--spacing", gen.spacing, "Voxel size X,Y,Z in mm")->capture_default_str();
  generate->add_option("--shape", gen.shape, "sphere or ellipsoid")->capture_default_str();
  generate->add_option("--radii", gen.radii, "Semi-axes X,Y,Z in voxels");
  generate->add_option("--radius-fraction", gen.radius_fraction,
                       "Radius as a fraction of the smallest extent when --radii is absent")
      ->capture_default_str();
  generate->add_option("--count", gen.count, "Number of pairs")->capture_default_str();
  generate->add_option("--prefix", gen.prefix, "File name prefix")->capture_default_str();
  generate->add_option("--center-jitter", gen.center_jitter, "Max centre offset in voxels per axis")
      ->capture_default_str();
  generate->add_option("--radius-jitter", gen.radius_jitter, "Max relative radius change")
      ->capture_default_str();
  generate->add_option("--fg-mean", gen.fg_mean, "Foreground intensity mean")->capture_default_str();
  generate->add_option("--bg-mean", gen.bg_mean, "Background intensity mean")->capture_default_str();
  generate->add_option("--class-stddev", gen.class_stddev, "Per-class intensity stddev")
      ->capture_default_str();
  generate->add_option("--noise", gen.noise, "Additive noise stddev")->capture_default_str();
  generate->add_option("--seed", g.seed, "Random seed");

  CLI::App* rf = app.add_subcommand("rf-table", "Print theoretical receptive fields per stage");
  add_config_flags(rf, g);

  TrainCliOptions tr;
  CLI::App* train_cmd = app.add_subcommand("train", "Train a network");
  train_cmd->add_option("--data", tr.data_dir, "Directory of <name>_image.vvol/<name>_label.vvol")
      ->required();
  train_cmd->add_option("--out", tr.out_dir, "Directory for history.csv and checkpoints")->required();
  train_cmd->add_option("--resume", tr.resume, "Checkpoint to continue from")->check(CLI::ExistingFile);
  train_cmd->add_option("--log-every", tr.log_every, "Progress line interval (0 = silent)")
      ->capture_default_str();
  train_cmd->add_option("--config", g.config_path, "Flat key=value configuration file")
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--seed", g.seed, "Random seed");
  add_config_flags(train_cmd, g);

  InferOptions inf;
  CLI::App* infer = app.add_subcommand("infer", "Segment one volume");
  infer->add_option("--model", inf.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--in", inf.in, "Input image")->required()->check(CLI::ExistingFile);
  infer->add_option("--out", inf.out, "Output mask")->required();
  infer->add_option("--prob", inf.prob, "Optional foreground probability output");

  EvaluateOptions ev;
  CLI::App* evaluate_cmd = app.add_subcommand("evaluate", "Dice and Hausdorff over a dataset");
  evaluate_cmd->add_option("--model", ev.model, "Checkpoint")->required()->check(CLI::ExistingFile);
  evaluate_cmd->add_option("--data", ev.data, "Labelled dataset directory")->required();
  evaluate_cmd->add_option("--report", ev.report, "CSV report path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error: usage: " << e.what() << "\n";
    return 2;
  }

#ifdef _OPENMP
  if (g.threads > 0) omp_set_num_threads(g.threads);
#endif

  try {
    if (generate->parsed()) return cmd_generate(gen, g, out);
    if (rf->parsed()) return cmd_rf_table(g, out);
    if (train_cmd->parsed()) return cmd_train(tr, g, out);
    if (infer->parsed()) return cmd_infer(inf, out);
    if (evaluate_cmd->parsed()) return cmd_evaluate(ev, out);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.kind() << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: internal: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace vnet
