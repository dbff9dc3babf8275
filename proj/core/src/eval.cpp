// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/eval.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

#include "ssodlab/errors.hpp"

namespace ssod {

void to_json(nlohmann::json& j, const EvalResult& r) {
  j = nlohmann::json{{"AP50_95", r.AP50_95},       {"AP50", r.AP50},
                     {"P", r.precision},           {"R", r.recall},
                     {"per_class_AP", r.per_class_ap},
                     {"per_class_AP50", r.per_class_ap50}};
}

namespace {

struct Ranked {
  double score;
  std::size_t image;
  std::size_t det;
};

// Indices of the top-k detections of one image by score (stable).
std::vector<std::size_t> top_k(const DetectionSet& d, std::size_t k) {
  std::vector<std::size_t> idx(d.boxes.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return d.boxes[a].score > d.boxes[b].score;
  });
  if (idx.size() > k) idx.resize(k);
  return idx;
}

// Greedy matching for one class; returns per-ranked-detection TP flags and
// the ground-truth count.
std::vector<bool> match_class(const std::vector<DetectionSet>& dets,
                              const std::vector<DetectionSet>& gts, int cls,
                              double iou_thr, std::size_t max_dets,
                              double min_score, std::size_t& npos) {
  std::vector<Ranked> ranked;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    for (std::size_t k : top_k(dets[i], max_dets)) {
      const Box& b = dets[i].boxes[k];
      if (b.class_id == cls && b.score >= min_score) ranked.push_back({b.score, i, k});
    }
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
  std::vector<std::vector<const Box*>> gt(gts.size());
  npos = 0;
  for (std::size_t i = 0; i < gts.size(); ++i) {
    for (const Box& b : gts[i].boxes) {
      if (b.class_id == cls) {
        gt[i].push_back(&b);
        ++npos;
      }
    }
  }
  std::vector<std::vector<bool>> used(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) used[i].assign(gt[i].size(), false);
  std::vector<bool> tp(ranked.size(), false);
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    const Box& d = dets[ranked[r].image].boxes[ranked[r].det];
    const std::size_t im = ranked[r].image;
    double best = iou_thr;
    int best_g = -1;
    for (std::size_t g = 0; g < gt[im].size(); ++g) {
      if (used[im][g]) continue;
      const double v = iou(d, *gt[im][g]);
      if (v >= best) {
        best = v;
        best_g = static_cast<int>(g);
      }
    }
    if (best_g >= 0) {
      used[im][static_cast<std::size_t>(best_g)] = true;
      tp[r] = true;
    }
  }
  return tp;
}

}  // namespace

double average_precision(const std::vector<DetectionSet>& dets,
                         const std::vector<DetectionSet>& gts, int class_id,
                         double iou_threshold, std::size_t max_dets) {
  if (dets.size() != gts.size()) {
    throw ShapeError("average_precision: " + std::to_string(dets.size()) +
                     " detection sets for " + std::to_string(gts.size()) + " images");
  }
  std::size_t npos = 0;
  const std::vector<bool> tp =
      match_class(dets, gts, class_id, iou_threshold, max_dets, 0.0, npos);
  if (npos == 0) return tp.empty() ? 1.0 : 0.0;
  std::vector<double> prec(tp.size()), rec(tp.size());
  double ntp = 0.0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    if (tp[i]) ntp += 1.0;
    prec[i] = ntp / static_cast<double>(i + 1);
    rec[i] = ntp / static_cast<double>(npos);
  }
  for (std::size_t i = prec.size(); i-- > 1;) prec[i - 1] = std::max(prec[i - 1], prec[i]);
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    const auto it = std::lower_bound(rec.begin(), rec.end(), r);
    if (it != rec.end()) sum += prec[static_cast<std::size_t>(it - rec.begin())];
  }
  return sum / 101.0;
}

EvalResult evaluate_map(const std::vector<DetectionSet>& dets,
                        const std::vector<DetectionSet>& gts, int num_classes,
                        const EvalOptions& opts) {
  if (dets.size() != gts.size()) {
    throw ShapeError("evaluate_map: " + std::to_string(dets.size()) +
                     " detection sets for " + std::to_string(gts.size()) + " images");
  }
  EvalResult r;
  r.per_class_ap.assign(static_cast<std::size_t>(num_classes), 0.0);
  r.per_class_ap50.assign(static_cast<std::size_t>(num_classes), 0.0);
  r.class_has_gt.assign(static_cast<std::size_t>(num_classes), false);
  int counted = 0;
  std::size_t total_tp = 0, total_det = 0, total_gt = 0;
  for (int c = 0; c < num_classes; ++c) {
    double sum = 0.0;
    for (int t = 0; t < 10; ++t) {
      const double thr = 0.5 + 0.05 * t;
      const double ap = average_precision(dets, gts, c, thr, opts.max_dets_per_image);
      sum += ap;
      if (t == 0) r.per_class_ap50[static_cast<std::size_t>(c)] = ap;
    }
    r.per_class_ap[static_cast<std::size_t>(c)] = sum / 10.0;
    std::size_t npos = 0;
    const std::vector<bool> tp =
        match_class(dets, gts, c, opts.pr_iou_threshold, opts.max_dets_per_image,
                    opts.pr_score_threshold, npos);
    total_tp += static_cast<std::size_t>(std::count(tp.begin(), tp.end(), true));
    total_det += tp.size();
    total_gt += npos;
    if (npos > 0) {
      r.class_has_gt[static_cast<std::size_t>(c)] = true;
      r.AP50_95 += r.per_class_ap[static_cast<std::size_t>(c)];
      r.AP50 += r.per_class_ap50[static_cast<std::size_t>(c)];
      ++counted;
    }
  }
  if (counted > 0) {
    r.AP50_95 /= counted;
    r.AP50 /= counted;
  }
  r.precision = total_det > 0 ? static_cast<double>(total_tp) / total_det : 0.0;
  r.recall = total_gt > 0 ? static_cast<double>(total_tp) / total_gt : 0.0;
  return r;
}

}  // namespace ssod
