// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/geometry.hpp"

#include <numeric>
#include <string>

#include <nlohmann/json.hpp>

#include "ssodlab/errors.hpp"

namespace ssod {

bool Box::valid() const {
  return w > 0.0 && h > 0.0 && score >= 0.0 && score <= 1.0 &&
         std::isfinite(cx) && std::isfinite(cy);
}

Box Box::from_corners(double x1, double y1, double x2, double y2, int class_id,
                      double score) {
  return Box{0.5 * (x1 + x2), 0.5 * (y1 + y2), x2 - x1, y2 - y1, class_id,
             score};
}

void to_json(nlohmann::json& j, const Box& b) {
  j = nlohmann::json{{"cx", b.cx}, {"cy", b.cy},         {"w", b.w},
                     {"h", b.h},   {"class_id", b.class_id}, {"score", b.score}};
}

void from_json(const nlohmann::json& j, Box& b) {
  j.at("cx").get_to(b.cx);
  j.at("cy").get_to(b.cy);
  j.at("w").get_to(b.w);
  j.at("h").get_to(b.h);
  j.at("class_id").get_to(b.class_id);
  j.at("score").get_to(b.score);
}

void to_json(nlohmann::json& j, const DetectionSet& d) {
  j = nlohmann::json{{"image_id", d.image_id}, {"boxes", d.boxes}};
}

void from_json(const nlohmann::json& j, DetectionSet& d) {
  j.at("image_id").get_to(d.image_id);
  j.at("boxes").get_to(d.boxes);
}

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double ih = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  if (uni <= 0.0) return 0.0;
  return inter / uni;
}

Box clip_box(const Box& b, double width, double height) {
  const double x1 = std::clamp(b.x1(), 0.0, width);
  const double x2 = std::clamp(b.x2(), 0.0, width);
  const double y1 = std::clamp(b.y1(), 0.0, height);
  const double y2 = std::clamp(b.y2(), 0.0, height);
  return Box::from_corners(x1, y1, x2, y2, b.class_id, b.score);
}

double ciou_loss(const Box& pred, const Box& gt) {
  return ciou_loss_generic<double>(pred.cx, pred.cy, pred.w, pred.h, gt.cx,
                                   gt.cy, gt.w, gt.h);
}

std::vector<std::size_t> nms_indices(const DetectionSet& dets,
                                     double iou_threshold,
                                     double score_threshold) {
  if (iou_threshold < 0.0 || iou_threshold > 1.0 || score_threshold < 0.0 ||
      score_threshold > 1.0) {
    throw ConfigError("nms: thresholds must lie in [0, 1]");
  }
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < dets.boxes.size(); ++i) {
    if (dets.boxes[i].score >= score_threshold) order.push_back(i);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dets.boxes[a].score > dets.boxes[b].score;
  });
  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const Box& cand = dets.boxes[idx];
    bool suppressed = false;
    for (std::size_t k : kept) {
      const Box& kb = dets.boxes[k];
      if (kb.class_id == cand.class_id && iou(kb, cand) > iou_threshold) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(idx);
  }
  return kept;
}

DetectionSet nms(const DetectionSet& dets, double iou_threshold,
                 double score_threshold) {
  DetectionSet out;
  out.image_id = dets.image_id;
  for (std::size_t i : nms_indices(dets, iou_threshold, score_threshold)) {
    out.boxes.push_back(dets.boxes[i]);
  }
  return out;
}

GridEncoding encode_box_to_grid(const Box& box, int stride, AnchorSize anchor,
                                int image_w, int image_h) {
  if (stride <= 0 || image_w % stride != 0 || image_h % stride != 0) {
    throw ShapeError("stride " + std::to_string(stride) +
                     " does not divide image size " + std::to_string(image_w) +
                     "x" + std::to_string(image_h));
  }
  if (anchor.w <= 0.0 || anchor.h <= 0.0) {
    throw ShapeError("anchor dimensions must be positive");
  }
  if (!(box.cx >= 0.0 && box.cx <= image_w && box.cy >= 0.0 &&
        box.cy <= image_h)) {
    throw OutOfBoundsError("box center (" + std::to_string(box.cx) + ", " +
                           std::to_string(box.cy) + ") outside image");
  }
  const int cols = image_w / stride;
  const int rows = image_h / stride;
  GridEncoding e;
  e.gx = std::min(static_cast<int>(std::floor(box.cx / stride)), cols - 1);
  e.gy = std::min(static_cast<int>(std::floor(box.cy / stride)), rows - 1);
  e.dx = box.cx / stride - (e.gx + 0.5);
  e.dy = box.cy / stride - (e.gy + 0.5);
  e.sw = box.w / anchor.w;
  e.sh = box.h / anchor.h;
  return e;
}

Box decode_grid(const GridEncoding& enc, int stride, AnchorSize anchor,
                int class_id, double score) {
  return Box{(enc.gx + 0.5 + enc.dx) * stride, (enc.gy + 0.5 + enc.dy) * stride,
             enc.sw * anchor.w, enc.sh * anchor.h, class_id, score};
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double offset_from_logit(double t) { return 2.0 * sigmoid(t) - 1.0; }

double scale_from_logit(double t) {
  const double s = 2.0 * sigmoid(t);
  return s * s;
}

double logit_from_offset(double offset) {
  const double p = 0.5 * (offset + 1.0);
  return std::log(p / (1.0 - p));
}

double logit_from_scale(double scale) {
  const double p = 0.5 * std::sqrt(scale);
  return std::log(p / (1.0 - p));
}

}  // namespace ssod
