// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "ssodlab/detector.hpp"
#include "ssodlab/losses.hpp"
#include "ssodlab/thresholds.hpp"

namespace ssod {

struct PseudoLabel {
  Box box;  ///< box.score == score, box.class_id == argmax(class_dist)
  double score = 0.0;
  std::vector<double> class_dist;
  double obj_prob = 0.0;

  bool operator==(const PseudoLabel&) const = default;
};

using PseudoLabelList = std::vector<PseudoLabel>;

struct PseudoLabelOptions {
  double conf_floor = 0.05;
  double nms_iou = 0.65;
  std::size_t max_per_image = 100;
};

/// Decode + class-wise NMS of one image's dense predictions. Survivors keep
/// the class distribution and objectness of their source cell.
PseudoLabelList pseudo_labels_from_predictions(const DensePredictions& preds,
                                               const AnchorConfig& cfg, int n,
                                               const PseudoLabelOptions& opts = {});

/// Teacher forward on a batch of weakly augmented images followed by
/// pseudo_labels_from_predictions for every image.
std::vector<PseudoLabelList> generate_pseudo_labels(
    const DetectorParams& teacher, const DetectorConfig& cfg,
    const Tensor& weak_images, const PseudoLabelOptions& opts = {});

/// Dense pseudo targets for a batch, one label list per image. Assignment
/// follows build_supervised_targets; when two labels claim one cell/anchor the
/// higher score wins, then the lower label index.
PseudoTargets assign_pseudo_targets(const std::vector<PseudoLabelList>& labels,
                                    const AnchorConfig& cfg, int image_size);

enum class CellCategory : std::uint8_t { kBackground, kUnreliable, kReliable };

struct AssignmentMasks {
  std::vector<std::vector<CellCategory>> levels;

  std::size_t count(CellCategory c) const;
};

/// Partition of every cell by its score against the thresholds of the cell's
/// argmax class. Throws ConfigError if tau1 > tau2 for any class.
AssignmentMasks categorize(const PseudoTargets& pt, const ThresholdSchedule& th);

}  // namespace ssod
