// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ssodlab/dual.hpp"

namespace ssod {

/// Axis-aligned box in center format, pixel units.
struct Box {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;
  int class_id = 0;
  double score = 1.0;

  double x1() const { return cx - 0.5 * w; }
  double y1() const { return cy - 0.5 * h; }
  double x2() const { return cx + 0.5 * w; }
  double y2() const { return cy + 0.5 * h; }
  double area() const { return w * h; }

  /// w > 0, h > 0 and score in [0, 1].
  bool valid() const;

  static Box from_corners(double x1, double y1, double x2, double y2,
                          int class_id = 0, double score = 1.0);

  bool operator==(const Box&) const = default;
};

struct DetectionSet {
  std::int64_t image_id = 0;
  std::vector<Box> boxes;

  bool operator==(const DetectionSet&) const = default;
};

void to_json(nlohmann::json& j, const Box& b);
void from_json(const nlohmann::json& j, Box& b);
void to_json(nlohmann::json& j, const DetectionSet& d);
void from_json(const nlohmann::json& j, DetectionSet& d);

/// Intersection over union. Zero-area operands yield 0.
double iou(const Box& a, const Box& b);

/// Clip a box to [0, width] x [0, height]; the result may be degenerate.
Box clip_box(const Box& b, double width, double height);

/// Complete-IoU loss core, generic over the scalar type so that gradients can
/// be taken with forward-mode duals. Returns
///   1 - IoU + rho^2 / c^2 + alpha * v,
/// v = 4/pi^2 (atan(wg/hg) - atan(wp/hp))^2, alpha = v / (1 - IoU + v)
/// (alpha = 0 when v = 0).
template <typename T>
T ciou_loss_generic(const T& pcx, const T& pcy, const T& pw, const T& ph,
                    double gcx, double gcy, double gw, double gh) {
  using std::atan;
  using std::max;
  using std::min;
  const T px1 = pcx - 0.5 * pw, px2 = pcx + 0.5 * pw;
  const T py1 = pcy - 0.5 * ph, py2 = pcy + 0.5 * ph;
  const double gx1 = gcx - 0.5 * gw, gx2 = gcx + 0.5 * gw;
  const double gy1 = gcy - 0.5 * gh, gy2 = gcy + 0.5 * gh;

  T iw = min(px2, T(gx2)) - max(px1, T(gx1));
  T ih = min(py2, T(gy2)) - max(py1, T(gy1));
  if (value_of(iw) < 0.0) iw = T(0.0);
  if (value_of(ih) < 0.0) ih = T(0.0);
  const T inter = iw * ih;
  const T uni = pw * ph + gw * gh - inter;
  const T iou_v = value_of(uni) > 0.0 ? inter / uni : T(0.0);

  const T cw = max(px2, T(gx2)) - min(px1, T(gx1));
  const T ch = max(py2, T(gy2)) - min(py1, T(gy1));
  const T c2 = cw * cw + ch * ch;
  const T dx = pcx - gcx;
  const T dy = pcy - gcy;
  const T rho2 = dx * dx + dy * dy;
  const T center_term = value_of(c2) > 0.0 ? rho2 / c2 : T(0.0);

  const T da = atan(T(gw / gh)) - atan(pw / ph);
  const T v = (4.0 / (std::numbers::pi * std::numbers::pi)) * da * da;
  T aspect_term(0.0);
  if (value_of(v) > 0.0) {
    const T alpha = v / (1.0 - iou_v + v);
    aspect_term = alpha * v;
  }
  return 1.0 - iou_v + center_term + aspect_term;
}

/// CIoU loss between a predicted and a ground-truth box; >= 0, and 0 iff the
/// boxes coincide.
double ciou_loss(const Box& pred, const Box& gt);

/// Greedy class-wise non-maximum suppression. Boxes below score_threshold are
/// discarded; within a class, a box is suppressed if its IoU with a kept
/// higher-ranked box exceeds iou_threshold. Ranking is by descending score,
/// ties broken by lower input index. Output is in rank order.
DetectionSet nms(const DetectionSet& dets, double iou_threshold,
                 double score_threshold);
/// Indices of the nms survivors, in rank order.
std::vector<std::size_t> nms_indices(const DetectionSet& dets,
                                     double iou_threshold,
                                     double score_threshold);

struct AnchorSize {
  double w = 0.0;
  double h = 0.0;
  bool operator==(const AnchorSize&) const = default;
};

/// Box position relative to one grid cell and one anchor:
///   cx = (gx + 0.5 + dx) * stride,  w = sw * anchor.w   (same for y/h).
struct GridEncoding {
  int gx = 0;
  int gy = 0;
  double dx = 0.0;
  double dy = 0.0;
  double sw = 1.0;
  double sh = 1.0;
};

/// Encode a box against the cell containing its center. Throws ShapeError if
/// stride does not divide the image, OutOfBoundsError if the center lies
/// outside the image. Centers on the right/bottom edge clamp to the last cell.
GridEncoding encode_box_to_grid(const Box& box, int stride, AnchorSize anchor,
                                int image_w, int image_h);

Box decode_grid(const GridEncoding& enc, int stride, AnchorSize anchor,
                int class_id = 0, double score = 1.0);

// Head parametrization: offset = 2*sigmoid(t) - 1 in (-1, 1) and
// scale = (2*sigmoid(t))^2 in (0, 4). Zero logits give a zero offset and a
// unit scale.
double sigmoid(double x);
double offset_from_logit(double t);
double scale_from_logit(double t);
double logit_from_offset(double offset);
double logit_from_scale(double scale);

}  // namespace ssod
