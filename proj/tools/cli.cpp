// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ssodlab/checkpoint.hpp"
#include "ssodlab/config.hpp"
#include "ssodlab/errors.hpp"
#include "ssodlab/split.hpp"
#include "ssodlab/synthetic.hpp"
#include "ssodlab/trainer.hpp"

namespace ssod::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string ckpt;
  std::string data;
  int n = 100;
  bool shifted = false;
  int canvas = 64;
};

class FileNotFound : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void require_file(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string(what) + " is required");
  if (!fs::exists(path)) throw FileNotFound(std::string(what) + " file not found: " + path);
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

TrainConfig resolve_config(const Options& o) {
  std::vector<std::string> overrides = o.overrides;
  if (o.seed) overrides.push_back("seed=" + std::to_string(*o.seed));
  if (o.config.empty()) return config_with_overrides(overrides);
  require_file(o.config, "config");
  return load_config(o.config, overrides);
}

// Loads the dataset(s) named in the config and builds the training data.
struct LoadedData {
  TrainData data;
  SplitManifest split;
  std::optional<SplitManifest> target_split;
};

SplitOptions split_options(const TrainConfig& cfg) {
  SplitOptions so;
  so.labeled_pct = cfg.labeled_pct;
  so.fold_seed = cfg.fold_seed;
  so.val_count = cfg.val_count;
  so.val_fraction = cfg.val_fraction;
  return so;
}

LoadedData load_train_data(const TrainConfig& cfg) {
  require_file(cfg.data_annotations, "data.annotations");
  const InMemoryDataset source = load_dataset(cfg.data_annotations);
  LoadedData ld;
  ld.split = make_split(source.meta, split_options(cfg));
  if (cfg.data_target_annotations.empty()) {
    ld.data = make_train_data(source, ld.split);
    return ld;
  }
  require_file(cfg.data_target_annotations, "data.target_annotations");
  const InMemoryDataset target = load_dataset(cfg.data_target_annotations);
  ld.target_split = make_split(target.meta, split_options(cfg));
  ld.data = make_adaptation_data(source, ld.split, target, *ld.target_split);
  return ld;
}

int cmd_gen_data(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("--out is required");
  if (o.n < 1) throw ConfigError("--n must be positive");
  SyntheticSceneSpec spec;
  spec.canvas = o.canvas;
  if (o.shifted) spec = spec.shifted();
  const json manifest = gen_synthetic_dataset(spec, o.n, o.seed.value_or(0), o.out);
  out << "wrote " << o.n << " images to " << o.out << "\n";
  (void)manifest;
  return kOk;
}

int cmd_train(const Options& o, std::ostream& out) {
  if (o.out.empty()) throw ConfigError("--out is required");
  const TrainConfig cfg = resolve_config(o);
  LoadedData ld = load_train_data(cfg);
  const DetectorConfig dcfg = cfg.detector(ld.data.num_classes);

  const fs::path dir(o.out);
  fs::create_directories(dir);
  write_text(dir / "config.json", cfg.to_flat().dump(2) + "\n");
  json split = {{"source", ld.split}};
  if (ld.target_split) split["target"] = *ld.target_split;
  write_text(dir / "split.json", split.dump(2) + "\n");

  TrainerState state;
  if (!o.ckpt.empty()) {
    require_file(o.ckpt, "checkpoint");
    state = load_checkpoint(o.ckpt, cfg, dcfg);
    out << "resuming from " << o.ckpt << " at epoch " << state.epoch << "\n";
  } else {
    state = init_state(cfg, dcfg);
    for (const char* f : {"metrics.jsonl", "thresholds.tsv"}) fs::remove(dir / f);
  }
  RunHooks hooks;
  hooks.out_dir = dir;
  hooks.log = [&out](const std::string& line) { out << line << std::endl; };
  run_training(state, cfg, dcfg, ld.data, hooks);
  if (!state.metrics.empty()) write_text(dir / "final.json", state.metrics.back().dump(2) + "\n");
  return kOk;
}

// Config used by the checkpoint-reading verbs: the stored one, with
// --config / --override applied on top when given.
TrainConfig checkpoint_view_config(const Options& o) {
  require_file(o.ckpt, "checkpoint");
  json flat = read_checkpoint_meta(o.ckpt).config;
  if (!o.config.empty()) {
    require_file(o.config, "config");
    const TrainConfig from_file = load_config(o.config, {});
    flat = from_file.to_flat();
  }
  for (const auto& ov : o.overrides) apply_override(flat, ov);
  return TrainConfig::from_flat(flat);
}

int num_classes_of(const fs::path& ckpt) {
  // The class count is recoverable from the head width of any level.
  const TrainConfig stored = checkpoint_config(ckpt);
  for (int c = 1; c <= 1000; ++c) {
    try {
      checkpoint_eval_params(ckpt, stored.detector(c));
      return c;
    } catch (const ShapeError&) {
    }
  }
  throw IntegrityError(ckpt.string() + ": cannot determine the class count");
}

struct EvalSet {
  std::vector<Image> images;
  std::vector<DetectionSet> gt;
  int num_classes = 0;
};

EvalSet eval_set(const Options& o, const TrainConfig& cfg) {
  EvalSet es;
  if (!o.data.empty()) {
    require_file(o.data, "data");
    const InMemoryDataset ds = load_dataset(o.data);
    es.num_classes = ds.meta.num_classes();
    es.images = ds.images;
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
      DetectionSet gt = ds.meta.ground_truth(i);
      gt.image_id = static_cast<std::int64_t>(i);
      es.gt.push_back(std::move(gt));
    }
    return es;
  }
  LoadedData ld = load_train_data(cfg);
  es.num_classes = ld.data.num_classes;
  es.images = std::move(ld.data.val);
  es.gt = std::move(ld.data.val_gt);
  return es;
}

int cmd_eval(const Options& o, std::ostream& out) {
  require_file(o.ckpt, "checkpoint");
  const TrainConfig cfg = checkpoint_view_config(o);
  const EvalSet es = eval_set(o, cfg);
  const DetectorConfig dcfg = cfg.detector(es.num_classes);
  const DetectorParams params = checkpoint_eval_params(o.ckpt, dcfg);
  const EvalResult r = evaluate_params(params, dcfg, cfg, es.images, es.gt);
  json j = r;
  j["images"] = es.images.size();
  j["checkpoint"] = o.ckpt;
  out << j.dump(2) << "\n";
  if (!o.out.empty()) {
    fs::create_directories(o.out);
    write_text(fs::path(o.out) / "eval.json", j.dump(2) + "\n");
    write_text(fs::path(o.out) / "config.json", cfg.to_flat().dump(2) + "\n");
  }
  return kOk;
}

std::string threshold_rows(const ThresholdSchedule& th, const EpochStats& stats,
                           const char* status) {
  std::ostringstream os;
  os.precision(17);
  for (std::size_t c = 0; c < th.tau1.size(); ++c) {
    os << th.epoch << '\t' << c << '\t' << th.tau1[c] << '\t' << th.tau2[c] << '\t'
       << (c < stats.score_lists.size() ? stats.score_lists[c].size() : 0) << '\t' << status
       << '\n';
  }
  return os.str();
}

int cmd_inspect_thresholds(const Options& o, std::ostream& out) {
  require_file(o.ckpt, "checkpoint");
  const TrainConfig cfg = checkpoint_config(o.ckpt);
  const int C = num_classes_of(o.ckpt);
  const TrainerState st = load_checkpoint(o.ckpt, cfg, cfg.detector(C));
  std::string text = "k\tclass\ttau1\ttau2\tnum_scores\tstatus\n";
  if (st.schedule_sealed) text += threshold_rows(st.schedule, EpochStats{}, "active");
  if (st.stats.num_classes() > 0) {
    EpochStats pending = st.stats;
    seal(pending);
    const ThresholdSchedule next =
        compute_thresholds(pending, cfg.alpha, cfg.fallback_tau1, cfg.fallback_tau2);
    text += threshold_rows(next, pending, "pending");
  }
  if (o.out.empty()) {
    out << text;
  } else {
    write_text(o.out, text);
    out << "wrote " << o.out << "\n";
  }
  return kOk;
}

int cmd_inspect_pseudo(const Options& o, std::ostream& out) {
  require_file(o.ckpt, "checkpoint");
  const TrainConfig cfg = checkpoint_view_config(o);
  const TrainConfig stored = checkpoint_config(o.ckpt);
  const int C = num_classes_of(o.ckpt);
  const TrainerState st = load_checkpoint(o.ckpt, stored, stored.detector(C));
  const DetectorConfig dcfg = cfg.detector(C);

  std::vector<Image> images;
  if (!o.data.empty()) {
    require_file(o.data, "data");
    images = load_dataset(o.data).images;
  } else {
    images = load_train_data(cfg).data.unlabeled;
  }
  if (images.size() > static_cast<std::size_t>(std::max(0, o.n))) {
    images.resize(static_cast<std::size_t>(std::max(0, o.n)));
  }
  const DetectorParams& params = st.has_teacher ? st.teacher : st.student;
  const auto labels = generate_pseudo_labels(params, dcfg, images_to_tensor(images), cfg.pseudo);
  json j;
  j["epoch"] = st.epoch;
  j["phase"] = phase_name(st.phase);
  j["images"] = json::array();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    json arr = json::array();
    for (const auto& pl : labels[i]) {
      arr.push_back({{"box", pl.box},
                     {"score", pl.score},
                     {"class_dist", pl.class_dist},
                     {"obj_prob", pl.obj_prob}});
    }
    j["images"].push_back({{"index", i}, {"labels", arr}});
  }
  if (st.schedule_sealed) {
    const PseudoTargets pt = assign_pseudo_targets(labels, dcfg.anchors, dcfg.image_size());
    const AssignmentMasks m = categorize(pt, st.schedule);
    j["cells"] = {{"background", m.count(CellCategory::kBackground)},
                  {"unreliable", m.count(CellCategory::kUnreliable)},
                  {"reliable", m.count(CellCategory::kReliable)}};
  }
  if (o.out.empty()) {
    out << j.dump(2) << "\n";
  } else {
    write_text(o.out, j.dump(2) + "\n");
    out << "wrote " << o.out << "\n";
  }
  return kOk;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"ssodlab: semi-supervised object detection toolkit"};
  app.require_subcommand(1);
  Options o;
  std::uint64_t seed = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "flat JSON config file");
    sub->add_option("--override", o.overrides, "key=value config override (repeatable)");
    sub->add_option("--seed", seed, "global seed")->each([&](const std::string&) { o.seed = seed; });
    sub->add_option("--out", o.out, "output directory or file");
  };

  auto* gen = app.add_subcommand("gen-data", "render a synthetic dataset");
  gen->add_option("--seed", seed, "dataset seed")->each([&](const std::string&) { o.seed = seed; });
  gen->add_option("--n", o.n, "number of images");
  gen->add_option("--out", o.out, "output directory");
  gen->add_option("--canvas", o.canvas, "image side in pixels");
  gen->add_flag("--shifted", o.shifted, "hue-shifted and blurred target domain");

  auto* train = app.add_subcommand("train", "burn-in then semi-supervised training");
  add_common(train);
  train->add_option("--ckpt", o.ckpt, "resume from this checkpoint");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval);
  eval->add_option("--ckpt", o.ckpt, "checkpoint to evaluate");
  eval->add_option("--data", o.data, "annotations.json to evaluate on (all images)");

  auto* ith = app.add_subcommand("inspect-thresholds", "dump per-class thresholds");
  ith->add_option("--ckpt", o.ckpt, "checkpoint");
  ith->add_option("--out", o.out, "output TSV file");

  auto* ips = app.add_subcommand("inspect-pseudo", "dump teacher pseudo labels");
  add_common(ips);
  ips->add_option("--ckpt", o.ckpt, "checkpoint");
  ips->add_option("--data", o.data, "annotations.json of the images to label");
  ips->add_option("--n", o.n, "number of images");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }

  try {
    if (*gen) return cmd_gen_data(o, out);
    if (*train) return cmd_train(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*ith) return cmd_inspect_thresholds(o, out);
    if (*ips) return cmd_inspect_pseudo(o, out);
  } catch (const FileNotFound& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kValidation;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << "\n";
    return kValidation;
  } catch (const ShapeError& e) {
    err << "shape error: " << e.what() << "\n";
    return kValidation;
  } catch (const IntegrityError& e) {
    err << "integrity error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    err << "runtime error: " << e.what() << "\n";
    return kRuntime;
  }
  err << "error: no verb given\n";
  return kValidation;
}

}  // namespace ssod::cli
