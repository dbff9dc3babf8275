// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/pseudo_label.hpp"

#include <algorithm>

#include "ssodlab/errors.hpp"

namespace ssod {

PseudoLabelList pseudo_labels_from_predictions(const DensePredictions& preds,
                                               const AnchorConfig& cfg, int n,
                                               const PseudoLabelOptions& opts) {
  std::vector<DecodedCell> cells = decode_cells(preds, cfg, n, opts.conf_floor);
  DetectionSet ds;
  ds.image_id = n;
  ds.boxes.reserve(cells.size());
  for (const auto& c : cells) ds.boxes.push_back(c.box);
  std::vector<std::size_t> keep = nms_indices(ds, opts.nms_iou, opts.conf_floor);
  if (keep.size() > opts.max_per_image) keep.resize(opts.max_per_image);
  PseudoLabelList out;
  out.reserve(keep.size());
  for (std::size_t i : keep) {
    DecodedCell& c = cells[i];
    PseudoLabel pl;
    pl.box = c.box;
    pl.score = c.box.score;
    pl.class_dist = std::move(c.class_dist);
    pl.obj_prob = c.obj_prob;
    out.push_back(std::move(pl));
  }
  return out;
}

std::vector<PseudoLabelList> generate_pseudo_labels(
    const DetectorParams& teacher, const DetectorConfig& cfg,
    const Tensor& weak_images, const PseudoLabelOptions& opts) {
  const ForwardResult fr = forward(teacher, cfg, weak_images);
  std::vector<PseudoLabelList> out;
  for (int n = 0; n < weak_images.n(); ++n) {
    out.push_back(pseudo_labels_from_predictions(fr.preds, cfg.anchors, n, opts));
  }
  return out;
}

PseudoTargets assign_pseudo_targets(const std::vector<PseudoLabelList>& labels,
                                    const AnchorConfig& cfg, int image_size) {
  const int g0 = image_size / cfg.strides[0];
  PseudoTargets t =
      empty_pseudo_targets(cfg, static_cast<int>(labels.size()), g0, g0);
  const auto C = static_cast<std::size_t>(cfg.num_classes);
  for (int n = 0; n < static_cast<int>(labels.size()); ++n) {
    const PseudoLabelList& list = labels[static_cast<std::size_t>(n)];
    for (int li = 0; li < static_cast<int>(list.size()); ++li) {
      const PseudoLabel& pl = list[static_cast<std::size_t>(li)];
      const Box& b = pl.box;
      if (!(b.w > 0.0 && b.h > 0.0) || b.cx < 0.0 || b.cy < 0.0 ||
          b.cx > image_size || b.cy > image_size) {
        continue;
      }
      if (pl.class_dist.size() != C) {
        throw ShapeError("pseudo label class distribution has " +
                         std::to_string(pl.class_dist.size()) +
                         " entries, expected " + std::to_string(C));
      }
      for (int l = 0; l < cfg.num_levels(); ++l) {
        const int a = best_anchor(cfg, l, b.w, b.h);
        if (a < 0) continue;
        auto& lt = t.levels[static_cast<std::size_t>(l)];
        const int stride = cfg.strides[static_cast<std::size_t>(l)];
        const int gx = std::min(static_cast<int>(b.cx / stride), lt.w - 1);
        const int gy = std::min(static_cast<int>(b.cy / stride), lt.h - 1);
        const std::size_t cell = lt.cell(n, a, gy, gx);
        if (lt.label_index[cell] >= 0 && !(pl.score > lt.p[cell])) continue;
        lt.label_index[cell] = li;
        lt.p[cell] = pl.score;
        std::copy(pl.class_dist.begin(), pl.class_dist.end(),
                  lt.soft_cls.begin() + static_cast<std::ptrdiff_t>(cell * C));
        lt.soft_reg[cell] = b;
        lt.soft_obj_target[cell] = 1.0;
        lt.soft_obj[cell] = pl.obj_prob;
      }
    }
  }
  return t;
}

std::size_t AssignmentMasks::count(CellCategory c) const {
  std::size_t n = 0;
  for (const auto& l : levels) n += static_cast<std::size_t>(std::count(l.begin(), l.end(), c));
  return n;
}

AssignmentMasks categorize(const PseudoTargets& pt, const ThresholdSchedule& th) {
  th.validate();
  AssignmentMasks m;
  for (const auto& lt : pt.levels) {
    std::vector<CellCategory> cats(lt.cells());
    for (std::size_t i = 0; i < lt.cells(); ++i) {
      const auto k = static_cast<std::size_t>(lt.cell_class(i));
      switch (obj_branch(lt.p[i], th.tau1.at(k), th.tau2.at(k))) {
        case ObjBranch::kBackground: cats[i] = CellCategory::kBackground; break;
        case ObjBranch::kReliable: cats[i] = CellCategory::kReliable; break;
        case ObjBranch::kUnreliable: cats[i] = CellCategory::kUnreliable; break;
      }
    }
    m.levels.push_back(std::move(cats));
  }
  return m;
}

}  // namespace ssod
