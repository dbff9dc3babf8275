// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ssodlab/detector.hpp"
#include "ssodlab/geometry.hpp"
#include "ssodlab/thresholds.hpp"

namespace ssod {

/// Dense per-cell buffers for one pyramid level, laid out [n][a][y][x].
struct LevelGrid {
  int n = 0;
  int a = 0;
  int h = 0;
  int w = 0;
  int c = 0;

  std::size_t cells() const {
    return static_cast<std::size_t>(n) * a * h * w;
  }
  std::size_t cell(int bn, int ba, int y, int x) const {
    return ((static_cast<std::size_t>(bn) * a + ba) * h + y) * w + x;
  }
};

struct LevelTargets : LevelGrid {
  std::vector<double> cls;  ///< cells * C, one-hot at positives
  std::vector<double> obj;  ///< 1 at positives, 0 elsewhere
  std::vector<Box> box;     ///< target box (pixels) at positives
  std::vector<std::uint8_t> positive;
};

/// Supervised targets (Y^cls, Y^obj, Y^reg and the positive mask).
struct DenseTargets {
  std::vector<LevelTargets> levels;
  int dropped = 0;  ///< GT boxes that matched no anchor

  std::size_t num_positive() const;
};

struct PseudoLevelTargets : LevelGrid {
  std::vector<double> p;                ///< pseudo-label score, 0 if unassigned
  std::vector<double> soft_cls;         ///< cells * C teacher distribution
  std::vector<Box> soft_reg;            ///< teacher box
  std::vector<double> soft_obj_target;  ///< objectness target for reliable cells
  std::vector<double> soft_obj;         ///< teacher objectness probability
  std::vector<int> label_index;         ///< source pseudo label, -1 if none

  /// Argmax of soft_cls at a cell (0 for unassigned cells).
  int cell_class(std::size_t cell) const;
};

struct PseudoTargets {
  std::vector<PseudoLevelTargets> levels;
};

/// Allocates zero-filled targets shaped like the head grids of `preds`
/// (batch size taken from `batch`).
DenseTargets empty_targets(const AnchorConfig& cfg, int batch, int grid0_h,
                           int grid0_w);
PseudoTargets empty_pseudo_targets(const AnchorConfig& cfg, int batch,
                                   int grid0_h, int grid0_w);

/// Assigns each GT box of every image to the best-IoU anchor (shape-only,
/// centre-aligned) of each level whose anchor/box size ratio lies within
/// [1/4, 4], at the cell containing the box centre. Within one cell/anchor a
/// better anchor match wins; ties go to the lower box index.
DenseTargets build_supervised_targets(const std::vector<DetectionSet>& gt,
                                      const AnchorConfig& cfg, int image_size);

/// Anchors of one level that a box of size (w, h) may be assigned to: index of
/// the best shape-IoU anchor among those within the size-ratio limit, or -1.
int best_anchor(const AnchorConfig& cfg, int level, double w, double h,
                double ratio_limit = 4.0);

/// Scalar loss plus its gradient w.r.t. each raw head tensor.
struct LossValue {
  double value = 0.0;
  std::size_t count = 0;  ///< contributing cells (before max(1, .) clamp)
  std::vector<Tensor> grads;
};

struct SupervisedLoss {
  LossValue cls;
  LossValue reg;
  LossValue obj;
  double value() const { return cls.value + reg.value + obj.value; }
};

/// Softmax cross-entropy at positives + CIoU at positives (both over the
/// positive count) + objectness BCE averaged over all cells.
SupervisedLoss supervised_loss(const DensePredictions& preds,
                               const DenseTargets& targets,
                               const AnchorConfig& cfg);

struct UnsupOptions {
  double obj_gate = 0.99;
  /// When false the tau1 < p < tau2 soft-objectness branch is dropped.
  bool unreliable_branch = true;
};

LossValue unsup_cls_loss(const DensePredictions& preds, const PseudoTargets& pt,
                         const ThresholdSchedule& th, const AnchorConfig& cfg);
LossValue unsup_reg_loss(const DensePredictions& preds, const PseudoTargets& pt,
                         const ThresholdSchedule& th, const AnchorConfig& cfg,
                         double obj_gate = 0.99);
/// Throws ConfigError if tau1 > tau2 for any class.
LossValue unsup_obj_loss(const DensePredictions& preds, const PseudoTargets& pt,
                         const ThresholdSchedule& th, const AnchorConfig& cfg,
                         bool unreliable_branch = true);

/// Which objectness branch a cell falls in.
enum class ObjBranch { kBackground, kReliable, kUnreliable };
ObjBranch obj_branch(double p, double tau1, double tau2);

struct UnsupervisedLoss {
  LossValue cls;
  LossValue reg;
  LossValue obj;
  double value() const { return cls.value + reg.value + obj.value; }
};

UnsupervisedLoss unsupervised_loss(const DensePredictions& preds,
                                   const PseudoTargets& pt,
                                   const ThresholdSchedule& th,
                                   const AnchorConfig& cfg,
                                   const UnsupOptions& opts = {});

/// L_s + lambda_u * L_u.
double total_loss(double supervised, double unsupervised, double lambda_u);

/// Supervised loss plus lambda_da times the domain loss.
double burnin_loss(double supervised, double domain, double lambda_da);

/// Per-term record of one training step or epoch average.
struct LossBreakdown {
  double L_s = 0.0;
  double L_u_cls = 0.0;
  double L_u_reg = 0.0;
  double L_u_obj = 0.0;
  double L_u = 0.0;
  double L_da = 0.0;
  double total = 0.0;
  double lambda_u = 1.0;
  double lambda_da = 0.0;

  bool operator==(const LossBreakdown&) const = default;
};

// Numerically stable elementary losses, exposed for tests and tooling.

/// Binary cross-entropy of a logit against a target probability.
double bce_with_logit(double logit, double target);
/// Soft-label softmax cross-entropy: sum_c q_c * (logsumexp(z) - z_c).
double softmax_cross_entropy(std::span<const double> logits,
                             std::span<const double> target);

/// CIoU between the box decoded from four raw logits and `target`, plus the
/// gradient w.r.t. the logits.
double ciou_from_logits(const double logits[4], int gx, int gy, int stride,
                        AnchorSize anchor, const Box& target, double grad[4]);

}  // namespace ssod
