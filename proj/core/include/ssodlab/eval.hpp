// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ssodlab/geometry.hpp"

namespace ssod {

struct EvalOptions {
  double pr_score_threshold = 0.25;
  double pr_iou_threshold = 0.5;
  std::size_t max_dets_per_image = 100;
};

struct EvalResult {
  double AP50_95 = 0.0;
  double AP50 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  /// Per class AP over IoU 0.50:0.95; classes without ground truth hold 1
  /// (no detections) or 0 (spurious detections) and are excluded from means.
  std::vector<double> per_class_ap;
  std::vector<double> per_class_ap50;
  std::vector<bool> class_has_gt;
};

void to_json(nlohmann::json& j, const EvalResult& r);

/// 101-point interpolated AP of one class at one IoU threshold, with greedy
/// score-descending matching per image. `dets` and `gts` are per image in
/// the same order.
double average_precision(const std::vector<DetectionSet>& dets,
                         const std::vector<DetectionSet>& gts, int class_id,
                         double iou_threshold, std::size_t max_dets = 100);

/// Detection metrics over a dataset. Images are paired by position.
EvalResult evaluate_map(const std::vector<DetectionSet>& dets,
                        const std::vector<DetectionSet>& gts, int num_classes,
                        const EvalOptions& opts = {});

}  // namespace ssod
