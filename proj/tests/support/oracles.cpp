// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace oracle {

std::pair<double, double> thresholds(std::vector<double> scores, std::int64_t n_c,
                                     std::int64_t N_l, std::int64_t N_u, double alpha,
                                     double fallback1, double fallback2) {
  if (scores.empty()) return {fallback1, fallback2};
  std::sort(scores.begin(), scores.end(), [](double a, double b) { return a > b; });
  const std::int64_t nl = N_l < 1 ? 1 : N_l;
  const std::int64_t nu = N_u < 1 ? 1 : N_u;
  // Round-half-up of n_c * nu / nl with integer arithmetic only.
  const std::int64_t num = n_c * nu;
  std::int64_t r1 = num / nl;
  const std::int64_t rem = num % nl;
  if (2 * rem >= nl) r1 += 1;
  const double r2d = alpha * static_cast<double>(r1) / 100.0;
  // Half away from zero; r2d is non-negative.
  std::int64_t r2 = static_cast<std::int64_t>(std::floor(r2d));
  if (r2d - std::floor(r2d) >= 0.5) r2 += 1;
  const auto len = static_cast<std::int64_t>(scores.size());
  auto clampk = [len](std::int64_t k) { return k < 1 ? 1 : (k > len ? len : k); };
  return {scores[static_cast<std::size_t>(clampk(r1) - 1)],
          scores[static_cast<std::size_t>(clampk(r2) - 1)]};
}

double iou(const ssod::Box& a, const ssod::Box& b) {
  const double ax1 = a.cx - a.w / 2, ax2 = a.cx + a.w / 2;
  const double ay1 = a.cy - a.h / 2, ay2 = a.cy + a.h / 2;
  const double bx1 = b.cx - b.w / 2, bx2 = b.cx + b.w / 2;
  const double by1 = b.cy - b.h / 2, by2 = b.cy + b.h / 2;
  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = iw * ih;
  const double uni = a.w * a.h + b.w * b.h - inter;
  return uni > 0 ? inter / uni : 0.0;
}

double ciou(const ssod::Box& p, const ssod::Box& g) {
  const double u = oracle::iou(p, g);
  const double ex1 = std::min(p.cx - p.w / 2, g.cx - g.w / 2);
  const double ex2 = std::max(p.cx + p.w / 2, g.cx + g.w / 2);
  const double ey1 = std::min(p.cy - p.h / 2, g.cy - g.h / 2);
  const double ey2 = std::max(p.cy + p.h / 2, g.cy + g.h / 2);
  const double diag2 = (ex2 - ex1) * (ex2 - ex1) + (ey2 - ey1) * (ey2 - ey1);
  const double rho2 = (p.cx - g.cx) * (p.cx - g.cx) + (p.cy - g.cy) * (p.cy - g.cy);
  const double pi = std::numbers::pi;
  const double d = std::atan(g.w / g.h) - std::atan(p.w / p.h);
  const double v = 4.0 / (pi * pi) * d * d;
  const double a = v > 0 ? v / ((1.0 - u) + v) : 0.0;
  return 1.0 - u + (diag2 > 0 ? rho2 / diag2 : 0.0) + a * v;
}

std::vector<std::size_t> nms(const std::vector<ssod::Box>& boxes, double iou_thr,
                             double score_thr) {
  std::vector<std::size_t> alive;
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    if (boxes[i].score >= score_thr) alive.push_back(i);
  }
  std::vector<std::size_t> kept;
  while (!alive.empty()) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < alive.size(); ++j) {
      if (boxes[alive[j]].score > boxes[alive[best]].score) best = j;
    }
    const std::size_t pick = alive[best];
    kept.push_back(pick);
    std::vector<std::size_t> rest;
    for (std::size_t j : alive) {
      if (j == pick) continue;
      if (boxes[j].class_id == boxes[pick].class_id && oracle::iou(boxes[j], boxes[pick]) > iou_thr) {
        continue;
      }
      rest.push_back(j);
    }
    alive = rest;
  }
  return kept;
}

namespace {

struct Det {
  double score;
  std::size_t image;
  ssod::Box box;
};

// Detections of one class after per-image top-k, in descending score order
// with ties broken by (image, position).
std::vector<Det> ranked(const std::vector<ssod::DetectionSet>& dets, int cls,
                        std::size_t max_dets, double min_score) {
  std::vector<Det> out;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const auto& bs = dets[i].boxes;
    // Selection by repeated maximum keeps the earliest among equal scores.
    std::vector<bool> taken(bs.size(), false);
    for (std::size_t k = 0; k < std::min(max_dets, bs.size()); ++k) {
      std::size_t best = bs.size();
      for (std::size_t j = 0; j < bs.size(); ++j) {
        if (taken[j]) continue;
        if (best == bs.size() || bs[j].score > bs[best].score) best = j;
      }
      taken[best] = true;
      if (bs[best].class_id == cls && bs[best].score >= min_score) {
        out.push_back({bs[best].score, i, bs[best]});
      }
    }
  }
  // Insertion sort: stable by construction.
  for (std::size_t i = 1; i < out.size(); ++i) {
    for (std::size_t j = i; j > 0 && out[j].score > out[j - 1].score; --j) {
      std::swap(out[j], out[j - 1]);
    }
  }
  return out;
}

std::vector<bool> greedy(const std::vector<Det>& r, const std::vector<ssod::DetectionSet>& gts,
                         int cls, double thr, std::size_t& npos) {
  npos = 0;
  std::vector<std::vector<bool>> used(gts.size());
  for (std::size_t i = 0; i < gts.size(); ++i) {
    used[i].assign(gts[i].boxes.size(), false);
    for (const auto& b : gts[i].boxes) npos += b.class_id == cls ? 1 : 0;
  }
  std::vector<bool> tp;
  for (const Det& d : r) {
    const auto& g = gts[d.image].boxes;
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      if (g[j].class_id != cls || used[d.image][j]) continue;
      const double v = oracle::iou(d.box, g[j]);
      // Later ground truths win ties, mirroring a ">= running best" scan.
      if (v >= thr && v >= best_iou) {
        best_iou = v;
        best = static_cast<int>(j);
      }
    }
    if (best >= 0) used[d.image][static_cast<std::size_t>(best)] = true;
    tp.push_back(best >= 0);
  }
  return tp;
}

}  // namespace

double average_precision(const std::vector<ssod::DetectionSet>& dets,
                         const std::vector<ssod::DetectionSet>& gts, int cls, double thr,
                         std::size_t max_dets) {
  const std::vector<Det> r = ranked(dets, cls, max_dets, 0.0);
  std::size_t npos = 0;
  const std::vector<bool> tp = greedy(r, gts, cls, thr, npos);
  if (npos == 0) return tp.empty() ? 1.0 : 0.0;
  std::vector<double> prec, rec;
  double hits = 0;
  for (std::size_t i = 0; i < tp.size(); ++i) {
    hits += tp[i] ? 1.0 : 0.0;
    prec.push_back(hits / static_cast<double>(i + 1));
    rec.push_back(hits / static_cast<double>(npos));
  }
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double level = k / 100.0;
    double best = 0.0;
    bool any = false;
    for (std::size_t i = 0; i < rec.size(); ++i) {
      if (rec[i] >= level) {
        best = any ? std::max(best, prec[i]) : prec[i];
        any = true;
      }
    }
    sum += best;
  }
  return sum / 101.0;
}

MapResult evaluate(const std::vector<ssod::DetectionSet>& dets,
                   const std::vector<ssod::DetectionSet>& gts, int num_classes,
                   double pr_score, double pr_iou) {
  MapResult m;
  int counted = 0;
  double tps = 0, ndet = 0, ngt = 0;
  for (int c = 0; c < num_classes; ++c) {
    std::size_t npos = 0;
    const std::vector<bool> tp = greedy(ranked(dets, c, 100, pr_score), gts, c, pr_iou, npos);
    for (bool t : tp) tps += t ? 1 : 0;
    ndet += static_cast<double>(tp.size());
    ngt += static_cast<double>(npos);
    if (npos == 0) continue;
    double s = 0.0;
    double ap50 = 0.0;
    for (int t = 0; t < 10; ++t) {
      const double ap = average_precision(dets, gts, c, 0.5 + 0.05 * t);
      s += ap;
      if (t == 0) ap50 = ap;
    }
    m.ap50_95 += s / 10.0;
    m.ap50 += ap50;
    ++counted;
  }
  if (counted > 0) {
    m.ap50_95 /= counted;
    m.ap50 /= counted;
  }
  m.precision = ndet > 0 ? tps / ndet : 0.0;
  m.recall = ngt > 0 ? tps / ngt : 0.0;
  return m;
}

namespace {
double sig(double t) { return 1.0 / (1.0 + std::exp(-t)); }
}  // namespace

ssod::Box decode(double tx, double ty, double tw, double th, int gx, int gy, int stride,
                 ssod::AnchorSize anchor) {
  ssod::Box b;
  b.cx = (gx + 2.0 * sig(tx) - 0.5) * stride;
  b.cy = (gy + 2.0 * sig(ty) - 0.5) * stride;
  b.w = std::pow(2.0 * sig(tw), 2) * anchor.w;
  b.h = std::pow(2.0 * sig(th), 2) * anchor.h;
  return b;
}

double bce(double z, double t) {
  const double p = sig(z);
  // Direct form; fine for the moderate logits used by the tests.
  return -(t * std::log(p) + (1.0 - t) * std::log(1.0 - p));
}

double softmax_ce(const std::vector<double>& z, const std::vector<double>& q) {
  double denom = 0.0;
  for (double v : z) denom += std::exp(v);
  double out = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    out -= q[c] * std::log(std::exp(z[c]) / denom);
  }
  return out;
}

namespace {

std::vector<double> class_logits(const ssod::DensePredictions& p, int l, int n, int a, int y,
                                 int x) {
  std::vector<double> z;
  for (int c = 0; c < p.num_classes; ++c) z.push_back(p.cls(l, n, a, c, y, x));
  return z;
}

double reg_term(const ssod::DensePredictions& p, const ssod::AnchorConfig& cfg, int l, int n,
                int a, int y, int x, const ssod::Box& target) {
  const ssod::Box b =
      decode(p.reg(l, n, a, 0, y, x), p.reg(l, n, a, 1, y, x), p.reg(l, n, a, 2, y, x),
             p.reg(l, n, a, 3, y, x), x, y, cfg.strides[static_cast<std::size_t>(l)],
             cfg.anchors[static_cast<std::size_t>(l)][static_cast<std::size_t>(a)]);
  return oracle::ciou(b, target);
}

double norm(double sum, int count) { return sum / (count < 1 ? 1 : count); }

}  // namespace

LossParts supervised(const ssod::DensePredictions& p, const ssod::DenseTargets& t,
                     const ssod::AnchorConfig& cfg) {
  double cls = 0, reg = 0, obj = 0;
  int npos = 0, ncell = 0;
  for (int l = 0; l < static_cast<int>(t.levels.size()); ++l) {
    const auto& lt = t.levels[static_cast<std::size_t>(l)];
    for (int n = 0; n < lt.n; ++n)
      for (int a = 0; a < lt.a; ++a)
        for (int y = 0; y < lt.h; ++y)
          for (int x = 0; x < lt.w; ++x) {
            const std::size_t cell = lt.cell(n, a, y, x);
            if (lt.positive[cell]) {
              std::vector<double> q(lt.cls.begin() + static_cast<long>(cell * lt.c),
                                    lt.cls.begin() + static_cast<long>((cell + 1) * lt.c));
              cls += softmax_ce(class_logits(p, l, n, a, y, x), q);
              reg += reg_term(p, cfg, l, n, a, y, x, lt.box[cell]);
              ++npos;
            }
            obj += bce(p.obj(l, n, a, y, x), lt.obj[cell]);
            ++ncell;
          }
  }
  return {norm(cls, npos), norm(reg, npos), norm(obj, ncell)};
}

LossParts unsupervised(const ssod::DensePredictions& p, const ssod::PseudoTargets& t,
                       const ssod::ThresholdSchedule& th, const ssod::AnchorConfig& cfg,
                       double obj_gate, bool unreliable_branch) {
  double cls = 0, reg = 0, obj = 0;
  int ncls = 0, nreg = 0, nobj = 0;
  for (int l = 0; l < static_cast<int>(t.levels.size()); ++l) {
    const auto& lt = t.levels[static_cast<std::size_t>(l)];
    for (int n = 0; n < lt.n; ++n)
      for (int a = 0; a < lt.a; ++a)
        for (int y = 0; y < lt.h; ++y)
          for (int x = 0; x < lt.w; ++x) {
            const std::size_t cell = lt.cell(n, a, y, x);
            std::vector<double> q(lt.soft_cls.begin() + static_cast<long>(cell * lt.c),
                                  lt.soft_cls.begin() + static_cast<long>((cell + 1) * lt.c));
            int k = 0;
            for (int c = 1; c < lt.c; ++c) {
              if (q[static_cast<std::size_t>(c)] > q[static_cast<std::size_t>(k)]) k = c;
            }
            const double s = lt.p[cell];
            const double t1 = th.tau1[static_cast<std::size_t>(k)];
            const double t2 = th.tau2[static_cast<std::size_t>(k)];
            const double z = p.obj(l, n, a, y, x);
            if (s <= t1) {
              obj += bce(z, 0.0);
              ++nobj;
            } else if (s >= t2) {
              obj += bce(z, lt.soft_obj_target[cell]);
              ++nobj;
            } else if (unreliable_branch) {
              obj += bce(z, lt.soft_obj[cell]);
              ++nobj;
            }
            if (s > 0 && s >= t2) {
              cls += softmax_ce(class_logits(p, l, n, a, y, x), q);
              ++ncls;
            }
            if (s > 0 && (s >= t2 || lt.soft_obj[cell] > obj_gate)) {
              reg += reg_term(p, cfg, l, n, a, y, x, lt.soft_reg[cell]);
              ++nreg;
            }
          }
  }
  return {norm(cls, ncls), norm(reg, nreg), norm(obj, nobj)};
}

std::vector<ssod::Box> decode_all(const ssod::DensePredictions& p, const ssod::AnchorConfig& cfg,
                                  int n, double conf) {
  std::vector<ssod::Box> out;
  const double W = p.levels[0].w() * cfg.strides[0];
  const double H = p.levels[0].h() * cfg.strides[0];
  for (int l = 0; l < static_cast<int>(p.levels.size()); ++l) {
    for (int a = 0; a < cfg.num_anchors(l); ++a) {
      for (int y = 0; y < p.levels[static_cast<std::size_t>(l)].h(); ++y) {
        for (int x = 0; x < p.levels[static_cast<std::size_t>(l)].w(); ++x) {
          const double o = sig(p.obj(l, n, a, y, x));
          const std::vector<double> z = class_logits(p, l, n, a, y, x);
          double den = 0;
          for (double v : z) den += std::exp(v);
          int k = 0;
          for (int c = 1; c < p.num_classes; ++c) {
            if (z[static_cast<std::size_t>(c)] > z[static_cast<std::size_t>(k)]) k = c;
          }
          const double score = o * std::exp(z[static_cast<std::size_t>(k)]) / den;
          if (o < conf || score < conf || score <= 0) continue;
          ssod::Box b = decode(p.reg(l, n, a, 0, y, x), p.reg(l, n, a, 1, y, x),
                               p.reg(l, n, a, 2, y, x), p.reg(l, n, a, 3, y, x), x, y,
                               cfg.strides[static_cast<std::size_t>(l)],
                               cfg.anchors[static_cast<std::size_t>(l)][static_cast<std::size_t>(a)]);
          const double x1 = std::clamp(b.cx - b.w / 2, 0.0, W);
          const double x2 = std::clamp(b.cx + b.w / 2, 0.0, W);
          const double y1 = std::clamp(b.cy - b.h / 2, 0.0, H);
          const double y2 = std::clamp(b.cy + b.h / 2, 0.0, H);
          if (!(x2 > x1 && y2 > y1)) continue;
          b = ssod::Box{(x1 + x2) / 2, (y1 + y2) / 2, x2 - x1, y2 - y1, k, score};
          out.push_back(b);
        }
      }
    }
  }
  return out;
}

}  // namespace oracle
