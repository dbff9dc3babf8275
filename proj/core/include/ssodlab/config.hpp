// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ssodlab/augment.hpp"
#include "ssodlab/detector.hpp"
#include "ssodlab/eval.hpp"
#include "ssodlab/pseudo_label.hpp"

namespace ssod {

/// Resolved training configuration. The file format is a flat JSON object
/// with dotted keys (e.g. "loss.lambda_u"); unknown keys are rejected.
struct TrainConfig {
  int epochs = 20;            ///< semi-supervised epochs after burn-in
  int burnin_epochs = -1;     ///< -1: max(1, round(0.1 * epochs))
  int batch_labeled = 8;
  int batch_unlabeled = 8;
  bool allow_unbalanced_batches = false;
  int steps_per_epoch = -1;   ///< -1: ceil(|unlabeled| / batch_unlabeled)
  double lr = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  double ema_momentum = 0.999;
  std::uint64_t seed = 0;

  double lambda_u = 1.0;
  double lambda_da = 0.1;
  double obj_gate = 0.99;
  bool unreliable_branch = true;
  std::string domain_mode = "reversed";  ///< reversed | plain | off

  std::vector<int> scales{1, 2};
  int image_size = 64;
  std::vector<int> backbone_widths{16, 32, 48, 64, 96};
  int neck_width = 32;
  int domain_width = 16;

  PseudoLabelOptions pseudo;
  double alpha = 50.0;
  std::size_t reservoir_cap = 100000;
  double fallback_tau1 = 0.0;
  double fallback_tau2 = 1.0;

  AugParams aug;

  EvalOptions eval;
  double eval_conf_threshold = 0.001;
  double eval_nms_iou = 0.65;

  std::string data_annotations;
  std::string data_target_annotations;
  double labeled_pct = 5.0;
  std::uint64_t fold_seed = 0;
  int val_count = -1;
  double val_fraction = 0.1;

  bool dump_scores = false;
  bool save_checkpoints = true;

  int resolved_burnin_epochs() const;
  DetectorConfig detector(int num_classes) const;
  DomainBranch domain_branch() const;

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  nlohmann::json to_flat() const;
  static TrainConfig from_flat(const nlohmann::json& flat);
  static const nlohmann::json& defaults();

  /// FNV-1a over the canonical JSON of to_flat().
  std::uint64_t hash() const;
};

/// Applies "key=value" overrides; values are parsed as JSON when possible,
/// otherwise taken as strings. Unknown keys or mismatched types throw
/// ConfigError.
void apply_override(nlohmann::json& flat, const std::string& assignment);

/// Reads a flat config file (missing keys take defaults) and applies the
/// overrides in order.
TrainConfig load_config(const std::filesystem::path& path,
                        const std::vector<std::string>& overrides);
TrainConfig config_with_overrides(const std::vector<std::string>& overrides);

std::uint64_t fnv1a(const std::string& bytes);

}  // namespace ssod
