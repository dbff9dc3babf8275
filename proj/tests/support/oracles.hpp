// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

// Reference implementations used by the tests. Each one is written directly
// from the definition with plain loops and shares no code with the library
// beyond the plain data types.

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "ssodlab/detector.hpp"
#include "ssodlab/geometry.hpp"
#include "ssodlab/losses.hpp"
#include "ssodlab/thresholds.hpp"

namespace oracle {

/// (tau1, tau2) by sorting a copy descending and indexing 1-based ranks.
std::pair<double, double> thresholds(std::vector<double> scores, std::int64_t n_c,
                                     std::int64_t N_l, std::int64_t N_u, double alpha,
                                     double fallback1 = 0.0, double fallback2 = 1.0);

double iou(const ssod::Box& a, const ssod::Box& b);

/// Complete IoU loss from corner coordinates.
double ciou(const ssod::Box& pred, const ssod::Box& gt);

/// O(n^2) greedy class-wise NMS; returns indices of survivors in pick order.
std::vector<std::size_t> nms(const std::vector<ssod::Box>& boxes, double iou_thr,
                             double score_thr);

/// AP of one class at one IoU threshold by explicit PR-curve construction and
/// 101-point interpolation.
double average_precision(const std::vector<ssod::DetectionSet>& dets,
                         const std::vector<ssod::DetectionSet>& gts, int cls, double thr,
                         std::size_t max_dets = 100);

struct MapResult {
  double ap50_95 = 0.0;
  double ap50 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};
MapResult evaluate(const std::vector<ssod::DetectionSet>& dets,
                   const std::vector<ssod::DetectionSet>& gts, int num_classes,
                   double pr_score = 0.25, double pr_iou = 0.5);

/// Head decode of one cell.
ssod::Box decode(double tx, double ty, double tw, double th, int gx, int gy, int stride,
                 ssod::AnchorSize anchor);

double bce(double logit, double target);
double softmax_ce(const std::vector<double>& logits, const std::vector<double>& q);

struct LossParts {
  double cls = 0.0;
  double reg = 0.0;
  double obj = 0.0;
};

/// Per-cell loop versions of the supervised and unsupervised losses.
LossParts supervised(const ssod::DensePredictions& p, const ssod::DenseTargets& t,
                     const ssod::AnchorConfig& cfg);
LossParts unsupervised(const ssod::DensePredictions& p, const ssod::PseudoTargets& t,
                       const ssod::ThresholdSchedule& th, const ssod::AnchorConfig& cfg,
                       double obj_gate = 0.99, bool unreliable_branch = true);

/// Decoded detections of image n by a per-cell loop (before NMS).
std::vector<ssod::Box> decode_all(const ssod::DensePredictions& p, const ssod::AnchorConfig& cfg,
                                  int n, double conf);

}  // namespace oracle
