// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ssodlab/geometry.hpp"
#include "ssodlab/image.hpp"

namespace ssod {

struct AugParams {
  double flip_prob = 0.5;
  double scale_prob = 0.5;
  double scale_min = 0.5;
  double scale_max = 1.5;
  double jitter_prob = 0.8;
  double jitter_strength = 0.4;
  double grayscale_prob = 0.1;
  double blur_prob = 0.2;
  double blur_sigma_max = 2.0;
  double cutout_prob = 0.3;
  double cutout_max_area = 0.2;
  double colorspace_prob = 0.1;
  double mosaic_prob = 1.0;
  double mixup_ratio = 0.5;
  double pseudo_mixup_prob = 0.25;
  double pseudo_mosaic_prob = 0.25;
  double pseudo_mosaic_scale = 0.5;
  double min_box_area = 4.0;

  void validate() const;
};

/// One applied transform and the parameters needed to replay it.
struct AugOp {
  std::string name;
  std::vector<double> params;

  bool operator==(const AugOp&) const = default;
};
using AugRecord = std::vector<AugOp>;

void to_json(nlohmann::json& j, const AugOp& op);
void from_json(const nlohmann::json& j, AugOp& op);

/// An image with boxes in its own pixel frame. `origin[i]` is an opaque tag
/// of boxes.boxes[i] that every transform carries through unchanged, so that
/// callers can map surviving boxes back to side data.
struct AugmentedSample {
  Image image;
  DetectionSet boxes;
  std::vector<int> origin;
  AugRecord record;
};

/// Wraps an image and its boxes; origins are 0..n-1 plus `origin_offset`.
AugmentedSample make_sample(Image image, DetectionSet boxes, int origin_offset = 0);

/// Grey used for padding outside placed content.
inline constexpr float kFillValue = 114.0f / 255.0f;

// Geometric primitives.
AugmentedSample hflip(const AugmentedSample& s);
/// Scales content by f about the image centre on an unchanged canvas; boxes
/// are clipped to the canvas and dropped below min_area.
AugmentedSample scale_about_center(const AugmentedSample& s, double f,
                                   double min_area = 4.0);

// Photometric primitives; boxes are never touched. Outputs stay in [0, 1].
void color_jitter(Image& img, double brightness, double contrast,
                  double saturation);
void to_grayscale(Image& img);
void gaussian_blur(Image& img, double sigma);
void cutout(Image& img, int x, int y, int w, int h, float value);
/// RGB -> BGR channel order conversion.
void swap_red_blue(Image& img);

/// Bilinear resize with half-pixel centres.
Image resize_image(const Image& img, int width, int height);

/// Replays `record` on its inputs. A record beginning with "mosaic" consumes
/// four inputs, one beginning with "mixup" consumes two, otherwise one.
AugmentedSample replay(std::span<const AugmentedSample> inputs,
                       const AugRecord& record, double min_area = 4.0);

/// 2x2 placement around (cx, cy): each source (optionally rescaled by
/// source_scale) has its inner corner at the centre and is cropped to its
/// quadrant (order: top-left, top-right, bottom-left, bottom-right). Boxes are
/// clipped to their quadrant; those below min_area are dropped.
AugmentedSample mosaic_place(std::span<const AugmentedSample> four, int canvas,
                             int cx, int cy, double source_scale = 1.0,
                             double min_area = 4.0);

/// mosaic_place with the centre drawn uniformly from the middle half of the
/// canvas.
AugmentedSample mosaic_compose(std::span<const AugmentedSample> four, int canvas,
                               std::uint64_t seed, double source_scale = 1.0,
                               double min_area = 4.0);

/// Mosaic (with probability mosaic_prob, else the first sample alone) followed
/// by a horizontal flip with probability flip_prob.
AugmentedSample weak_augment(std::span<const AugmentedSample> four, int canvas,
                             std::uint64_t seed, const AugParams& p);

/// Horizontal flip with probability flip_prob only.
AugmentedSample weak_flip(const AugmentedSample& s, std::uint64_t seed,
                          const AugParams& p);

/// Flip, scale, colour jitter, grayscale, blur, cutout and colour-space
/// conversion, each drawn with its own probability.
AugmentedSample strong_augment(const AugmentedSample& s, std::uint64_t seed,
                               const AugParams& p);

/// Pixel blend ratio * a + (1 - ratio) * b with the box lists concatenated.
AugmentedSample pseudo_mixup(const AugmentedSample& a, const AugmentedSample& b,
                             double ratio = 0.5);

/// mosaic_compose over pseudo-labelled samples downscaled by
/// pseudo_mosaic_scale; scores pass through unchanged.
AugmentedSample pseudo_mosaic(std::span<const AugmentedSample> four, int canvas,
                              std::uint64_t seed, const AugParams& p);

/// Per-class box counts of a sample.
std::vector<std::int64_t> class_counts(const DetectionSet& boxes, int num_classes);

}  // namespace ssod
