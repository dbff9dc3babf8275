// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "ssodlab/autograd.hpp"
#include "ssodlab/geometry.hpp"
#include "ssodlab/multiscale.hpp"
#include "ssodlab/tensor.hpp"

namespace ssod {

/// Pyramid strides and per-level anchors of the one-stage head.
struct AnchorConfig {
  std::vector<int> strides{8, 16, 32};
  std::vector<std::vector<AnchorSize>> anchors;
  int num_classes = 1;

  /// Three anchors per level with aspect ratios 1:1, 1:2 and 2:1 whose area
  /// equals (base_multiple * stride)^2.
  static AnchorConfig make_default(int num_classes, double base_multiple = 1.5);

  int num_levels() const { return static_cast<int>(strides.size()); }
  int num_anchors(int level) const {
    return static_cast<int>(anchors[static_cast<std::size_t>(level)].size());
  }
  /// Channels per anchor in the raw head output: 4 box + 1 objectness + C.
  int channels_per_anchor() const { return 5 + num_classes; }

  void validate() const;
};

struct DetectorConfig {
  AnchorConfig anchors = AnchorConfig::make_default(3);
  ScaleSpec multiscale;
  std::vector<int> backbone_widths{16, 32, 48, 64, 96};
  int neck_width = 32;
  int domain_width = 16;
  double leaky_slope = 0.1;

  int image_size() const { return multiscale.default_size; }
  void validate() const;
};

using DetectorParams = ParameterSet;

/// Per-level feature grids (N, C, H, W). After the neck every level has the
/// same channel count.
struct FeaturePyramid {
  std::vector<Tensor> levels;
};

/// Raw head outputs, one (N, A*(5+C), H, W) tensor per level. Within an
/// anchor's channel block: [0,4) box logits, 4 objectness logit, 5.. class
/// logits.
struct DensePredictions {
  int num_classes = 0;
  std::vector<int> strides;
  std::vector<int> anchors_per_level;
  std::vector<Tensor> levels;

  int batch() const { return levels.empty() ? 0 : levels.front().n(); }
  int channel(int anchor, int k) const { return anchor * (5 + num_classes) + k; }

  double reg(int l, int n, int a, int k, int y, int x) const {
    return levels[static_cast<std::size_t>(l)].at(n, channel(a, k), y, x);
  }
  double obj(int l, int n, int a, int y, int x) const {
    return levels[static_cast<std::size_t>(l)].at(n, channel(a, 4), y, x);
  }
  double cls(int l, int n, int a, int c, int y, int x) const {
    return levels[static_cast<std::size_t>(l)].at(n, channel(a, 5 + c), y, x);
  }
  bool all_finite() const;
};

/// Deterministic He-normal initialisation from `seed`.
DetectorParams make_detector_params(const DetectorConfig& cfg, std::uint64_t seed);

enum class DomainBranch {
  kOff,       ///< no domain classifier
  kReversed,  ///< classifier attached through gradient reversal
  kPlain,     ///< classifier attached without reversal (control)
};

struct TapedForward {
  std::vector<Var> backbone;  ///< multi-scale stage features (P3, P4, P5)
  std::vector<Var> neck;      ///< fused pyramid (PP3, PP4, PP5)
  std::vector<Var> heads;     ///< raw head outputs per level
  Var domain_logits;          ///< (N, 1, H4, W4) when enabled
};

/// Single-scale backbone on a batch of default-size images.
std::vector<Var> backbone_forward(Graph& g, const DetectorParams& params,
                                  const DetectorConfig& cfg, Var images);

TapedForward forward_taped(Graph& g, const DetectorParams& params,
                           const DetectorConfig& cfg, Var images,
                           DomainBranch domain = DomainBranch::kOff);

struct ForwardResult {
  FeaturePyramid features;
  DensePredictions preds;
};

/// Inference forward pass. Throws ShapeError naming the offending stride if
/// the image size is not divisible by it.
ForwardResult forward(const DetectorParams& params, const DetectorConfig& cfg,
                      const Tensor& images);

/// Multi-scale backbone features (before channel reduction and neck).
FeaturePyramid multiscale_extract(const DetectorParams& params,
                                  const DetectorConfig& cfg, const Tensor& images);

DensePredictions to_dense_predictions(const Graph& g, const TapedForward& out,
                                      const AnchorConfig& anchors);

/// A decoded cell with the per-class distribution kept for pseudo-labelling.
struct DecodedCell {
  Box box;
  std::vector<double> class_dist;
  double obj_prob = 0.0;
  int level = 0;
  int anchor = 0;
  int gy = 0;
  int gx = 0;
};

/// Predicted box of one cell/anchor from its four raw box logits.
Box decode_cell_box(double tx, double ty, double tw, double th, int gx, int gy,
                    int stride, AnchorSize anchor);

/// Softmax over `logits`, computed stably.
std::vector<double> softmax(std::span<const double> logits);

/// All cells of image `n` whose confidence sigmoid(obj) * max softmax(cls) is
/// at least conf_threshold, boxes clipped to the image (degenerate ones
/// dropped). Order: level, anchor, row, column.
std::vector<DecodedCell> decode_cells(const DensePredictions& preds,
                                      const AnchorConfig& cfg, int n,
                                      double conf_threshold);

/// decode_cells for every image in the batch, as DetectionSets.
std::vector<DetectionSet> decode_predictions(const DensePredictions& preds,
                                             const AnchorConfig& cfg,
                                             double conf_threshold);

}  // namespace ssod
