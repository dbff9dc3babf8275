// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "ssodlab/errors.hpp"

namespace ssod {

using nlohmann::json;

int TrainConfig::resolved_burnin_epochs() const {
  if (burnin_epochs >= 0) return burnin_epochs;
  return std::max(1, static_cast<int>(std::lround(0.1 * epochs)));
}

DetectorConfig TrainConfig::detector(int num_classes) const {
  DetectorConfig d;
  d.anchors = AnchorConfig::make_default(num_classes);
  d.multiscale.scales = scales;
  d.multiscale.default_size = image_size;
  d.backbone_widths = backbone_widths;
  d.neck_width = neck_width;
  d.domain_width = domain_width;
  d.validate();
  return d;
}

DomainBranch TrainConfig::domain_branch() const {
  if (domain_mode == "plain") return DomainBranch::kPlain;
  if (domain_mode == "off") return DomainBranch::kOff;
  return DomainBranch::kReversed;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& m) { throw ConfigError(m); };
  if (epochs < 0) fail("epochs must be >= 0");
  if (burnin_epochs < -1) fail("burnin_epochs must be >= 0 (or -1 for the default)");
  if (batch_labeled < 1 || batch_unlabeled < 1) fail("batch sizes must be >= 1");
  if (batch_labeled != batch_unlabeled && !allow_unbalanced_batches) {
    fail("batch_labeled must equal batch_unlabeled unless allow_unbalanced_batches is set");
  }
  if (steps_per_epoch == 0 || steps_per_epoch < -1) {
    fail("steps_per_epoch must be positive (or -1 for the default)");
  }
  if (!(lr > 0.0)) fail("lr must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) fail("momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(ema_momentum > 0.0 && ema_momentum < 1.0)) fail("ema_momentum must lie in (0, 1)");
  if (!(lambda_u >= 0.0)) fail("loss.lambda_u must be >= 0");
  if (!(lambda_da >= 0.0)) fail("loss.lambda_da must be >= 0");
  if (!(obj_gate >= 0.0 && obj_gate <= 1.0)) fail("loss.obj_gate must lie in [0, 1]");
  if (domain_mode != "reversed" && domain_mode != "plain" && domain_mode != "off") {
    fail("domain.mode must be one of reversed, plain, off");
  }
  ScaleSpec spec{scales, image_size};
  spec.validate();
  if (image_size % 32 != 0) fail("multiscale.default_size must be a multiple of 32");
  if (!(pseudo.conf_floor >= 0.0 && pseudo.conf_floor <= 1.0)) {
    fail("pseudo.conf_floor must lie in [0, 1]");
  }
  if (!(pseudo.nms_iou >= 0.0 && pseudo.nms_iou <= 1.0)) fail("pseudo.nms_iou must lie in [0, 1]");
  if (pseudo.max_per_image < 1) fail("pseudo.max_per_image must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 100.0)) fail("epoch_corresponding.alpha must lie in [0, 100]");
  if (reservoir_cap < 1) fail("epoch_corresponding.reservoir_cap must be >= 1");
  if (!(fallback_tau1 >= 0.0 && fallback_tau1 <= fallback_tau2 && fallback_tau2 <= 1.0)) {
    fail("epoch_corresponding fallback thresholds must satisfy 0 <= tau1 <= tau2 <= 1");
  }
  aug.validate();
  if (!(labeled_pct > 0.0 && labeled_pct <= 100.0)) fail("data.labeled_pct must lie in (0, 100]");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) fail("data.val_fraction must lie in [0, 1)");
}

json TrainConfig::to_flat() const {
  json j;
  j["epochs"] = epochs;
  j["burnin_epochs"] = burnin_epochs;
  j["batch_labeled"] = batch_labeled;
  j["batch_unlabeled"] = batch_unlabeled;
  j["allow_unbalanced_batches"] = allow_unbalanced_batches;
  j["steps_per_epoch"] = steps_per_epoch;
  j["lr"] = lr;
  j["momentum"] = momentum;
  j["weight_decay"] = weight_decay;
  j["ema_momentum"] = ema_momentum;
  j["seed"] = seed;
  j["loss.lambda_u"] = lambda_u;
  j["loss.lambda_da"] = lambda_da;
  j["loss.obj_gate"] = obj_gate;
  j["loss.unreliable_branch"] = unreliable_branch;
  j["domain.mode"] = domain_mode;
  j["multiscale.scales"] = scales;
  j["multiscale.default_size"] = image_size;
  j["model.backbone_widths"] = backbone_widths;
  j["model.neck_width"] = neck_width;
  j["model.domain_width"] = domain_width;
  j["pseudo.conf_floor"] = pseudo.conf_floor;
  j["pseudo.nms_iou"] = pseudo.nms_iou;
  j["pseudo.max_per_image"] = pseudo.max_per_image;
  j["epoch_corresponding.alpha"] = alpha;
  j["epoch_corresponding.reservoir_cap"] = reservoir_cap;
  j["epoch_corresponding.fallback_tau1"] = fallback_tau1;
  j["epoch_corresponding.fallback_tau2"] = fallback_tau2;
  j["aug.flip_prob"] = aug.flip_prob;
  j["aug.scale_prob"] = aug.scale_prob;
  j["aug.scale_min"] = aug.scale_min;
  j["aug.scale_max"] = aug.scale_max;
  j["aug.jitter_prob"] = aug.jitter_prob;
  j["aug.jitter_strength"] = aug.jitter_strength;
  j["aug.grayscale_prob"] = aug.grayscale_prob;
  j["aug.blur_prob"] = aug.blur_prob;
  j["aug.blur_sigma_max"] = aug.blur_sigma_max;
  j["aug.cutout_prob"] = aug.cutout_prob;
  j["aug.cutout_max_area"] = aug.cutout_max_area;
  j["aug.colorspace_prob"] = aug.colorspace_prob;
  j["aug.mosaic_prob"] = aug.mosaic_prob;
  j["aug.mixup_ratio"] = aug.mixup_ratio;
  j["aug.pseudo_mixup_prob"] = aug.pseudo_mixup_prob;
  j["aug.pseudo_mosaic_prob"] = aug.pseudo_mosaic_prob;
  j["aug.pseudo_mosaic_scale"] = aug.pseudo_mosaic_scale;
  j["aug.min_box_area"] = aug.min_box_area;
  j["eval.score_threshold"] = eval.pr_score_threshold;
  j["eval.iou_threshold"] = eval.pr_iou_threshold;
  j["eval.max_dets"] = eval.max_dets_per_image;
  j["eval.conf_threshold"] = eval_conf_threshold;
  j["eval.nms_iou"] = eval_nms_iou;
  j["data.annotations"] = data_annotations;
  j["data.target_annotations"] = data_target_annotations;
  j["data.labeled_pct"] = labeled_pct;
  j["data.fold_seed"] = fold_seed;
  j["data.val_count"] = val_count;
  j["data.val_fraction"] = val_fraction;
  j["output.dump_scores"] = dump_scores;
  j["output.save_checkpoints"] = save_checkpoints;
  return j;
}

const json& TrainConfig::defaults() {
  static const json d = TrainConfig{}.to_flat();
  return d;
}

namespace {

bool same_kind(const json& def, const json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) {
    if (!v.is_array()) return false;
    for (const auto& e : v) {
      if (!e.is_number_integer()) return false;
    }
    return true;
  }
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number_float()) return v.is_number();
  return false;
}

void check_entry(const std::string& key, const json& v) {
  const json& d = TrainConfig::defaults();
  if (!d.contains(key)) throw ConfigError("unknown config key '" + key + "'");
  if (!same_kind(d.at(key), v)) {
    throw ConfigError("config key '" + key + "' expects a value like " + d.at(key).dump() +
                      ", got " + v.dump());
  }
  if (d.at(key).is_number_unsigned() && v.is_number_integer() && v.get<std::int64_t>() < 0) {
    throw ConfigError("config key '" + key + "' must be non-negative");
  }
}

}  // namespace

TrainConfig TrainConfig::from_flat(const json& flat) {
  if (!flat.is_object()) throw ConfigError("config must be a JSON object");
  json m = defaults();
  for (const auto& [key, v] : flat.items()) {
    check_entry(key, v);
    m[key] = v;
  }
  TrainConfig c;
  c.epochs = m["epochs"];
  c.burnin_epochs = m["burnin_epochs"];
  c.batch_labeled = m["batch_labeled"];
  c.batch_unlabeled = m["batch_unlabeled"];
  c.allow_unbalanced_batches = m["allow_unbalanced_batches"];
  c.steps_per_epoch = m["steps_per_epoch"];
  c.lr = m["lr"];
  c.momentum = m["momentum"];
  c.weight_decay = m["weight_decay"];
  c.ema_momentum = m["ema_momentum"];
  c.seed = m["seed"];
  c.lambda_u = m["loss.lambda_u"];
  c.lambda_da = m["loss.lambda_da"];
  c.obj_gate = m["loss.obj_gate"];
  c.unreliable_branch = m["loss.unreliable_branch"];
  c.domain_mode = m["domain.mode"];
  c.scales = m["multiscale.scales"].get<std::vector<int>>();
  c.image_size = m["multiscale.default_size"];
  c.backbone_widths = m["model.backbone_widths"].get<std::vector<int>>();
  c.neck_width = m["model.neck_width"];
  c.domain_width = m["model.domain_width"];
  c.pseudo.conf_floor = m["pseudo.conf_floor"];
  c.pseudo.nms_iou = m["pseudo.nms_iou"];
  c.pseudo.max_per_image = m["pseudo.max_per_image"];
  c.alpha = m["epoch_corresponding.alpha"];
  c.reservoir_cap = m["epoch_corresponding.reservoir_cap"];
  c.fallback_tau1 = m["epoch_corresponding.fallback_tau1"];
  c.fallback_tau2 = m["epoch_corresponding.fallback_tau2"];
  c.aug.flip_prob = m["aug.flip_prob"];
  c.aug.scale_prob = m["aug.scale_prob"];
  c.aug.scale_min = m["aug.scale_min"];
  c.aug.scale_max = m["aug.scale_max"];
  c.aug.jitter_prob = m["aug.jitter_prob"];
  c.aug.jitter_strength = m["aug.jitter_strength"];
  c.aug.grayscale_prob = m["aug.grayscale_prob"];
  c.aug.blur_prob = m["aug.blur_prob"];
  c.aug.blur_sigma_max = m["aug.blur_sigma_max"];
  c.aug.cutout_prob = m["aug.cutout_prob"];
  c.aug.cutout_max_area = m["aug.cutout_max_area"];
  c.aug.colorspace_prob = m["aug.colorspace_prob"];
  c.aug.mosaic_prob = m["aug.mosaic_prob"];
  c.aug.mixup_ratio = m["aug.mixup_ratio"];
  c.aug.pseudo_mixup_prob = m["aug.pseudo_mixup_prob"];
  c.aug.pseudo_mosaic_prob = m["aug.pseudo_mosaic_prob"];
  c.aug.pseudo_mosaic_scale = m["aug.pseudo_mosaic_scale"];
  c.aug.min_box_area = m["aug.min_box_area"];
  c.eval.pr_score_threshold = m["eval.score_threshold"];
  c.eval.pr_iou_threshold = m["eval.iou_threshold"];
  c.eval.max_dets_per_image = m["eval.max_dets"];
  c.eval_conf_threshold = m["eval.conf_threshold"];
  c.eval_nms_iou = m["eval.nms_iou"];
  c.data_annotations = m["data.annotations"];
  c.data_target_annotations = m["data.target_annotations"];
  c.labeled_pct = m["data.labeled_pct"];
  c.fold_seed = m["data.fold_seed"];
  c.val_count = m["data.val_count"];
  c.val_fraction = m["data.val_fraction"];
  c.dump_scores = m["output.dump_scores"];
  c.save_checkpoints = m["output.save_checkpoints"];
  c.validate();
  return c;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t TrainConfig::hash() const { return fnv1a(to_flat().dump()); }

void apply_override(json& flat, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json v = json::parse(raw, nullptr, false);
  if (v.is_discarded()) v = raw;
  const json& d = TrainConfig::defaults();
  if (d.contains(key) && d.at(key).is_string() && !v.is_string()) v = raw;
  check_entry(key, v);
  flat[key] = v;
}

TrainConfig config_with_overrides(const std::vector<std::string>& overrides) {
  json flat = json::object();
  for (const auto& o : overrides) apply_override(flat, o);
  return TrainConfig::from_flat(flat);
}

TrainConfig load_config(const std::filesystem::path& path,
                        const std::vector<std::string>& overrides) {
  std::ifstream is(path);
  if (!is) throw ConfigError("config file not found: " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  json flat = json::parse(ss.str(), nullptr, false);
  if (flat.is_discarded()) throw ConfigError("config file is not valid JSON: " + path.string());
  if (!flat.is_object()) throw ConfigError("config file must hold a JSON object");
  for (const auto& [key, v] : flat.items()) check_entry(key, v);
  for (const auto& o : overrides) apply_override(flat, o);
  return TrainConfig::from_flat(flat);
}

}  // namespace ssod
