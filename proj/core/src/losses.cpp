// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssodlab/errors.hpp"

namespace ssod {

void ThresholdSchedule::validate() const {
  if (tau1.size() != tau2.size()) {
    throw ConfigError("threshold schedule: tau1/tau2 length mismatch");
  }
  for (std::size_t c = 0; c < tau1.size(); ++c) {
    if (!(tau1[c] >= 0.0 && tau1[c] <= tau2[c] && tau2[c] <= 1.0)) {
      throw ConfigError("threshold schedule: class " + std::to_string(c) +
                        " violates 0 <= tau1 <= tau2 <= 1 (tau1=" +
                        std::to_string(tau1[c]) +
                        ", tau2=" + std::to_string(tau2[c]) + ")");
    }
  }
}

ThresholdSchedule ThresholdSchedule::uniform(int num_classes, double t1,
                                             double t2) {
  ThresholdSchedule s;
  s.tau1.assign(static_cast<std::size_t>(num_classes), t1);
  s.tau2.assign(static_cast<std::size_t>(num_classes), t2);
  return s;
}

std::size_t DenseTargets::num_positive() const {
  std::size_t n = 0;
  for (const auto& l : levels) {
    n += static_cast<std::size_t>(
        std::count(l.positive.begin(), l.positive.end(), std::uint8_t{1}));
  }
  return n;
}

int PseudoLevelTargets::cell_class(std::size_t cell) const {
  const auto first = soft_cls.begin() + static_cast<std::ptrdiff_t>(cell * c);
  return static_cast<int>(std::max_element(first, first + c) - first);
}

namespace {

template <typename Grid>
void shape_grid(Grid& g, const AnchorConfig& cfg, int level, int batch,
                int grid0_h, int grid0_w) {
  const int ratio = cfg.strides[static_cast<std::size_t>(level)] / cfg.strides[0];
  g.n = batch;
  g.a = cfg.num_anchors(level);
  g.h = grid0_h / ratio;
  g.w = grid0_w / ratio;
  g.c = cfg.num_classes;
}

}  // namespace

DenseTargets empty_targets(const AnchorConfig& cfg, int batch, int grid0_h,
                           int grid0_w) {
  DenseTargets t;
  for (int l = 0; l < cfg.num_levels(); ++l) {
    LevelTargets lt;
    shape_grid(lt, cfg, l, batch, grid0_h, grid0_w);
    lt.cls.assign(lt.cells() * static_cast<std::size_t>(lt.c), 0.0);
    lt.obj.assign(lt.cells(), 0.0);
    lt.box.assign(lt.cells(), Box{});
    lt.positive.assign(lt.cells(), 0);
    t.levels.push_back(std::move(lt));
  }
  return t;
}

PseudoTargets empty_pseudo_targets(const AnchorConfig& cfg, int batch,
                                   int grid0_h, int grid0_w) {
  PseudoTargets t;
  for (int l = 0; l < cfg.num_levels(); ++l) {
    PseudoLevelTargets lt;
    shape_grid(lt, cfg, l, batch, grid0_h, grid0_w);
    lt.p.assign(lt.cells(), 0.0);
    lt.soft_cls.assign(lt.cells() * static_cast<std::size_t>(lt.c), 0.0);
    lt.soft_reg.assign(lt.cells(), Box{});
    lt.soft_obj_target.assign(lt.cells(), 0.0);
    lt.soft_obj.assign(lt.cells(), 0.0);
    lt.label_index.assign(lt.cells(), -1);
    t.levels.push_back(std::move(lt));
  }
  return t;
}

int best_anchor(const AnchorConfig& cfg, int level, double w, double h,
                double ratio_limit) {
  int best = -1;
  double best_iou = -1.0;
  const auto& anchors = cfg.anchors[static_cast<std::size_t>(level)];
  for (int a = 0; a < static_cast<int>(anchors.size()); ++a) {
    const AnchorSize an = anchors[static_cast<std::size_t>(a)];
    const double r = std::max({w / an.w, an.w / w, h / an.h, an.h / h});
    if (r > ratio_limit) continue;
    const double inter = std::min(w, an.w) * std::min(h, an.h);
    const double u = w * h + an.w * an.h - inter;
    const double v = inter / u;
    if (v > best_iou) {
      best_iou = v;
      best = a;
    }
  }
  return best;
}

namespace {

double shape_iou(double w, double h, AnchorSize an) {
  const double inter = std::min(w, an.w) * std::min(h, an.h);
  return inter / (w * h + an.w * an.h - inter);
}

}  // namespace

DenseTargets build_supervised_targets(const std::vector<DetectionSet>& gt,
                                      const AnchorConfig& cfg, int image_size) {
  const int g0 = image_size / cfg.strides[0];
  DenseTargets t = empty_targets(cfg, static_cast<int>(gt.size()), g0, g0);
  std::vector<std::vector<double>> match(t.levels.size());
  for (std::size_t l = 0; l < t.levels.size(); ++l) {
    match[l].assign(t.levels[l].cells(), -1.0);
  }
  for (int n = 0; n < static_cast<int>(gt.size()); ++n) {
    for (const Box& b : gt[static_cast<std::size_t>(n)].boxes) {
      if (!(b.w > 0.0 && b.h > 0.0) || b.cx < 0.0 || b.cy < 0.0 ||
          b.cx > image_size || b.cy > image_size) {
        ++t.dropped;
        continue;
      }
      bool any = false;
      for (int l = 0; l < cfg.num_levels(); ++l) {
        const int a = best_anchor(cfg, l, b.w, b.h);
        if (a < 0) continue;
        any = true;
        auto& lt = t.levels[static_cast<std::size_t>(l)];
        const int stride = cfg.strides[static_cast<std::size_t>(l)];
        const int gx = std::min(static_cast<int>(b.cx / stride), lt.w - 1);
        const int gy = std::min(static_cast<int>(b.cy / stride), lt.h - 1);
        const std::size_t cell = lt.cell(n, a, gy, gx);
        const double q = shape_iou(
            b.w, b.h, cfg.anchors[static_cast<std::size_t>(l)][static_cast<std::size_t>(a)]);
        if (q <= match[static_cast<std::size_t>(l)][cell]) continue;
        match[static_cast<std::size_t>(l)][cell] = q;
        lt.positive[cell] = 1;
        lt.obj[cell] = 1.0;
        lt.box[cell] = b;
        double* cls = lt.cls.data() + cell * static_cast<std::size_t>(lt.c);
        std::fill(cls, cls + lt.c, 0.0);
        cls[b.class_id] = 1.0;
      }
      if (!any) ++t.dropped;
    }
  }
  return t;
}

double bce_with_logit(double x, double t) {
  return std::max(x, 0.0) - x * t + std::log1p(std::exp(-std::abs(x)));
}

double softmax_cross_entropy(std::span<const double> z,
                             std::span<const double> q) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  const double lse = m + std::log(s);
  double out = 0.0;
  for (std::size_t c = 0; c < z.size(); ++c) {
    if (q[c] != 0.0) out += q[c] * (lse - z[c]);
  }
  return out;
}

double ciou_from_logits(const double logits[4], int gx, int gy, int stride,
                        AnchorSize anchor, const Box& target, double grad[4]) {
  using D = Dual<4>;
  auto sig = [](const D& t) { return 1.0 / (1.0 + exp(-t)); };
  const D tx = D::variable(logits[0], 0);
  const D ty = D::variable(logits[1], 1);
  const D tw = D::variable(logits[2], 2);
  const D th = D::variable(logits[3], 3);
  const D cx = (gx + 0.5 + (2.0 * sig(tx) - 1.0)) * static_cast<double>(stride);
  const D cy = (gy + 0.5 + (2.0 * sig(ty) - 1.0)) * static_cast<double>(stride);
  const D sw = 2.0 * sig(tw);
  const D sh = 2.0 * sig(th);
  const D w = sw * sw * anchor.w;
  const D h = sh * sh * anchor.h;
  const D loss =
      ciou_loss_generic<D>(cx, cy, w, h, target.cx, target.cy, target.w, target.h);
  for (int i = 0; i < 4; ++i) grad[i] = loss.d[static_cast<std::size_t>(i)];
  return loss.v;
}

namespace {

struct HeadView {
  const DensePredictions& preds;
  int level;
  const Tensor& t;
  int cpa;

  HeadView(const DensePredictions& p, int l)
      : preds(p),
        level(l),
        t(p.levels[static_cast<std::size_t>(l)]),
        cpa(5 + p.num_classes) {}

  std::size_t idx(int n, int a, int k, int y, int x) const {
    return t.index(n, a * cpa + k, y, x);
  }
};

std::vector<Tensor> zero_grads(const DensePredictions& preds) {
  std::vector<Tensor> g;
  g.reserve(preds.levels.size());
  for (const auto& t : preds.levels) g.emplace_back(t.shape());
  return g;
}

template <typename Grid>
void check_shapes(const DensePredictions& preds, const std::vector<Grid>& levels,
                  const char* what) {
  if (preds.levels.size() != levels.size()) {
    throw ShapeError(std::string(what) + ": predictions have " +
                     std::to_string(preds.levels.size()) + " levels, targets " +
                     std::to_string(levels.size()));
  }
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const Tensor& t = preds.levels[l];
    const Grid& g = levels[l];
    if (t.n() != g.n || t.h() != g.h || t.w() != g.w ||
        t.c() != g.a * (5 + preds.num_classes) || g.c != preds.num_classes) {
      throw ShapeError(std::string(what) + ": level " + std::to_string(l) +
                       " prediction " + t.shape().str() +
                       " does not match target grid");
    }
  }
}

// Accumulates sum_i f_i and gradients for one component, then normalizes by
// max(1, count).
struct Accum {
  LossValue out;
  explicit Accum(const DensePredictions& p) { out.grads = zero_grads(p); }
  void finish() {
    const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, out.count));
    out.value *= norm;
    for (auto& g : out.grads) g.scale_(norm);
  }
};

void add_softmax_ce(Accum& acc, const HeadView& hv, int n, int a, int y, int x,
                    const double* q, int C) {
  std::vector<double> z(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) z[static_cast<std::size_t>(c)] = hv.t[hv.idx(n, a, 5 + c, y, x)];
  acc.out.value += softmax_cross_entropy(z, std::span<const double>(q, static_cast<std::size_t>(C)));
  double qsum = 0.0;
  for (int c = 0; c < C; ++c) qsum += q[c];
  const std::vector<double> p = softmax(z);
  Tensor& g = acc.out.grads[static_cast<std::size_t>(hv.level)];
  for (int c = 0; c < C; ++c) {
    g[hv.idx(n, a, 5 + c, y, x)] += qsum * p[static_cast<std::size_t>(c)] - q[c];
  }
  ++acc.out.count;
}

void add_ciou(Accum& acc, const HeadView& hv, const AnchorConfig& cfg, int n,
              int a, int y, int x, const Box& target) {
  double lg[4];
  double gr[4];
  for (int k = 0; k < 4; ++k) lg[k] = hv.t[hv.idx(n, a, k, y, x)];
  const auto& anchor =
      cfg.anchors[static_cast<std::size_t>(hv.level)][static_cast<std::size_t>(a)];
  acc.out.value += ciou_from_logits(
      lg, x, y, cfg.strides[static_cast<std::size_t>(hv.level)], anchor, target, gr);
  Tensor& g = acc.out.grads[static_cast<std::size_t>(hv.level)];
  for (int k = 0; k < 4; ++k) g[hv.idx(n, a, k, y, x)] += gr[k];
  ++acc.out.count;
}

void add_bce(Accum& acc, const HeadView& hv, int n, int a, int y, int x,
             double target) {
  const double z = hv.t[hv.idx(n, a, 4, y, x)];
  acc.out.value += bce_with_logit(z, target);
  acc.out.grads[static_cast<std::size_t>(hv.level)][hv.idx(n, a, 4, y, x)] +=
      sigmoid(z) - target;
  ++acc.out.count;
}

// Visits every (level, n, a, y, x, cell) of a target grid list in layout order.
template <typename Grid, typename F>
void for_each_cell(const std::vector<Grid>& levels, F&& f) {
  for (int l = 0; l < static_cast<int>(levels.size()); ++l) {
    const Grid& g = levels[static_cast<std::size_t>(l)];
    for (int n = 0; n < g.n; ++n)
      for (int a = 0; a < g.a; ++a)
        for (int y = 0; y < g.h; ++y)
          for (int x = 0; x < g.w; ++x) f(l, n, a, y, x, g.cell(n, a, y, x));
  }
}

}  // namespace

SupervisedLoss supervised_loss(const DensePredictions& preds,
                               const DenseTargets& targets,
                               const AnchorConfig& cfg) {
  check_shapes(preds, targets.levels, "supervised_loss");
  Accum cls(preds), reg(preds), obj(preds);
  const int C = preds.num_classes;
  for_each_cell(targets.levels, [&](int l, int n, int a, int y, int x,
                                    std::size_t cell) {
    const LevelTargets& lt = targets.levels[static_cast<std::size_t>(l)];
    const HeadView hv(preds, l);
    if (lt.positive[cell]) {
      add_softmax_ce(cls, hv, n, a, y, x,
                     lt.cls.data() + cell * static_cast<std::size_t>(C), C);
      add_ciou(reg, hv, cfg, n, a, y, x, lt.box[cell]);
    }
    add_bce(obj, hv, n, a, y, x, lt.obj[cell]);
  });
  cls.finish();
  reg.finish();
  obj.finish();
  return {std::move(cls.out), std::move(reg.out), std::move(obj.out)};
}

ObjBranch obj_branch(double p, double tau1, double tau2) {
  if (p <= tau1) return ObjBranch::kBackground;
  if (p >= tau2) return ObjBranch::kReliable;
  return ObjBranch::kUnreliable;
}

namespace {

void check_thresholds(const ThresholdSchedule& th, int num_classes) {
  th.validate();
  if (th.num_classes() != num_classes) {
    throw ConfigError("threshold schedule has " +
                      std::to_string(th.num_classes()) + " classes, model has " +
                      std::to_string(num_classes));
  }
}

}  // namespace

LossValue unsup_cls_loss(const DensePredictions& preds, const PseudoTargets& pt,
                         const ThresholdSchedule& th, const AnchorConfig&) {
  check_shapes(preds, pt.levels, "unsup_cls_loss");
  check_thresholds(th, preds.num_classes);
  Accum acc(preds);
  const int C = preds.num_classes;
  for_each_cell(pt.levels, [&](int l, int n, int a, int y, int x,
                               std::size_t cell) {
    const PseudoLevelTargets& lt = pt.levels[static_cast<std::size_t>(l)];
    const double p = lt.p[cell];
    if (p <= 0.0) return;
    if (p < th.tau2[static_cast<std::size_t>(lt.cell_class(cell))]) return;
    add_softmax_ce(acc, HeadView(preds, l), n, a, y, x,
                   lt.soft_cls.data() + cell * static_cast<std::size_t>(C), C);
  });
  acc.finish();
  return std::move(acc.out);
}

LossValue unsup_reg_loss(const DensePredictions& preds, const PseudoTargets& pt,
                         const ThresholdSchedule& th, const AnchorConfig& cfg,
                         double obj_gate) {
  check_shapes(preds, pt.levels, "unsup_reg_loss");
  check_thresholds(th, preds.num_classes);
  Accum acc(preds);
  for_each_cell(pt.levels, [&](int l, int n, int a, int y, int x,
                               std::size_t cell) {
    const PseudoLevelTargets& lt = pt.levels[static_cast<std::size_t>(l)];
    const double p = lt.p[cell];
    if (p <= 0.0) return;
    const bool reliable =
        p >= th.tau2[static_cast<std::size_t>(lt.cell_class(cell))];
    if (!reliable && !(lt.soft_obj[cell] > obj_gate)) return;
    add_ciou(acc, HeadView(preds, l), cfg, n, a, y, x, lt.soft_reg[cell]);
  });
  acc.finish();
  return std::move(acc.out);
}

LossValue unsup_obj_loss(const DensePredictions& preds, const PseudoTargets& pt,
                         const ThresholdSchedule& th, const AnchorConfig&,
                         bool unreliable_branch) {
  check_shapes(preds, pt.levels, "unsup_obj_loss");
  check_thresholds(th, preds.num_classes);
  Accum acc(preds);
  for_each_cell(pt.levels, [&](int l, int n, int a, int y, int x,
                               std::size_t cell) {
    const PseudoLevelTargets& lt = pt.levels[static_cast<std::size_t>(l)];
    const std::size_t k = static_cast<std::size_t>(lt.cell_class(cell));
    switch (obj_branch(lt.p[cell], th.tau1[k], th.tau2[k])) {
      case ObjBranch::kBackground:
        add_bce(acc, HeadView(preds, l), n, a, y, x, 0.0);
        break;
      case ObjBranch::kReliable:
        add_bce(acc, HeadView(preds, l), n, a, y, x, lt.soft_obj_target[cell]);
        break;
      case ObjBranch::kUnreliable:
        if (unreliable_branch) {
          add_bce(acc, HeadView(preds, l), n, a, y, x, lt.soft_obj[cell]);
        }
        break;
    }
  });
  acc.finish();
  return std::move(acc.out);
}

UnsupervisedLoss unsupervised_loss(const DensePredictions& preds,
                                   const PseudoTargets& pt,
                                   const ThresholdSchedule& th,
                                   const AnchorConfig& cfg,
                                   const UnsupOptions& opts) {
  UnsupervisedLoss u;
  u.cls = unsup_cls_loss(preds, pt, th, cfg);
  u.reg = unsup_reg_loss(preds, pt, th, cfg, opts.obj_gate);
  u.obj = unsup_obj_loss(preds, pt, th, cfg, opts.unreliable_branch);
  return u;
}

double total_loss(double supervised, double unsupervised, double lambda_u) {
  if (lambda_u < 0.0) throw ConfigError("lambda_u must be >= 0");
  return supervised + lambda_u * unsupervised;
}

double burnin_loss(double supervised, double domain, double lambda_da) {
  if (lambda_da < 0.0) throw ConfigError("lambda_da must be >= 0");
  return supervised + lambda_da * domain;
}

}  // namespace ssod
