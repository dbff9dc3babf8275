// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/detector.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "ssodlab/errors.hpp"
#include "ssodlab/rng.hpp"

namespace ssod {

AnchorConfig AnchorConfig::make_default(int num_classes, double base_multiple) {
  AnchorConfig cfg;
  cfg.num_classes = num_classes;
  const double r = std::sqrt(2.0);
  for (int s : cfg.strides) {
    const double base = base_multiple * s;
    cfg.anchors.push_back({AnchorSize{base, base}, AnchorSize{base / r, base * r},
                           AnchorSize{base * r, base / r}});
  }
  return cfg;
}

void AnchorConfig::validate() const {
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (strides.empty()) throw ConfigError("at least one pyramid level required");
  if (anchors.size() != strides.size()) {
    throw ConfigError("anchors_per_level must have one entry per stride");
  }
  for (std::size_t i = 0; i < strides.size(); ++i) {
    if (strides[i] <= 0 || (i > 0 && strides[i] <= strides[i - 1])) {
      throw ConfigError("strides must be positive and strictly increasing");
    }
    if (anchors[i].empty()) throw ConfigError("every level needs an anchor");
    for (const auto& a : anchors[i]) {
      if (!(a.w > 0.0 && a.h > 0.0)) {
        throw ConfigError("anchor dimensions must be > 0");
      }
    }
  }
}

void DetectorConfig::validate() const {
  anchors.validate();
  multiscale.validate();
  if (anchors.strides != std::vector<int>{8, 16, 32}) {
    throw ConfigError("the toy backbone provides strides [8, 16, 32] only");
  }
  if (backbone_widths.size() != 5) {
    throw ConfigError("backbone_widths needs 5 entries");
  }
  if (multiscale.default_size % anchors.strides.back() != 0) {
    throw ConfigError("default_size must be divisible by the largest stride");
  }
}

bool DensePredictions::all_finite() const {
  return std::all_of(levels.begin(), levels.end(),
                     [](const Tensor& t) { return t.all_finite(); });
}

namespace {

void add_conv(DetectorParams& p, Rng& rng, const std::string& name, int cin,
              int cout, int k, double gain = std::sqrt(2.0)) {
  Tensor w(cout, cin, k, k);
  const double stddev = gain / std::sqrt(static_cast<double>(cin * k * k));
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = rng.normal(0.0, stddev);
  p.add(name + ".w", std::move(w));
  p.add(name + ".b", Tensor(1, cout, 1, 1));
}

Var conv(Graph& g, const DetectorParams& p, const std::string& name, Var x,
         int stride, int pad) {
  return ops::conv2d(g, x, g.param(p.get(name + ".w")),
                     g.param(p.get(name + ".b")), stride, pad);
}

Var conv_act(Graph& g, const DetectorParams& p, const DetectorConfig& cfg,
             const std::string& name, Var x, int stride, int pad) {
  return ops::leaky_relu(g, conv(g, p, name, x, stride, pad), cfg.leaky_slope);
}

const char* kLevelNames[] = {"p3", "p4", "p5"};

}  // namespace

DetectorParams make_detector_params(const DetectorConfig& cfg,
                                    std::uint64_t seed) {
  cfg.validate();
  Rng rng(derive_seed({seed, 0x5eedULL}));
  DetectorParams p;
  const auto& w = cfg.backbone_widths;
  add_conv(p, rng, "backbone.conv0", 3, w[0], 3);
  add_conv(p, rng, "backbone.conv1", w[0], w[1], 3);
  add_conv(p, rng, "backbone.conv2", w[1], w[2], 3);
  add_conv(p, rng, "backbone.conv2b", w[2], w[2], 3);
  add_conv(p, rng, "backbone.conv3", w[2], w[3], 3);
  add_conv(p, rng, "backbone.conv4", w[3], w[4], 3);

  const int num_scales = static_cast<int>(cfg.multiscale.scales.size());
  const int level_width[] = {w[2], w[3], w[4]};
  if (num_scales > 1) {
    for (int l = 0; l < 3; ++l) {
      add_conv(p, rng, std::string("reduce.") + kLevelNames[l],
               level_width[l] * num_scales, level_width[l], 1);
    }
  }
  for (int l = 0; l < 3; ++l) {
    add_conv(p, rng, std::string("neck.lateral.") + kLevelNames[l],
             level_width[l], cfg.neck_width, 1);
  }
  for (int l = 0; l < 3; ++l) {
    add_conv(p, rng, std::string("neck.out.") + kLevelNames[l], cfg.neck_width,
             cfg.neck_width, 3);
  }
  const int cpa = cfg.anchors.channels_per_anchor();
  for (int l = 0; l < 3; ++l) {
    const int na = cfg.anchors.num_anchors(l);
    const std::string name = std::string("head.") + kLevelNames[l];
    add_conv(p, rng, name, cfg.neck_width, na * cpa, 1, 0.01 * std::sqrt(cfg.neck_width));
    // Objectness prior of roughly one object per 100 cells.
    Tensor& b = p.get(name + ".b").value;
    for (int a = 0; a < na; ++a) b[static_cast<std::size_t>(a * cpa + 4)] = -4.6;
  }
  add_conv(p, rng, "domain.conv1", cfg.neck_width, cfg.domain_width, 3);
  add_conv(p, rng, "domain.conv2", cfg.domain_width, 1, 1, 1.0);
  return p;
}

std::vector<Var> backbone_forward(Graph& g, const DetectorParams& params,
                                  const DetectorConfig& cfg, Var images) {
  Var x = conv_act(g, params, cfg, "backbone.conv0", images, 2, 1);
  x = conv_act(g, params, cfg, "backbone.conv1", x, 2, 1);
  x = conv_act(g, params, cfg, "backbone.conv2", x, 2, 1);
  Var p3 = conv_act(g, params, cfg, "backbone.conv2b", x, 1, 1);
  Var p4 = conv_act(g, params, cfg, "backbone.conv3", p3, 2, 1);
  Var p5 = conv_act(g, params, cfg, "backbone.conv4", p4, 2, 1);
  return {p3, p4, p5};
}

namespace {

void check_input(const DetectorConfig& cfg, const Tensor& images) {
  if (images.c() != 3) {
    throw ShapeError("detector input must have 3 channels, got " +
                     images.shape().str());
  }
  for (int s : cfg.anchors.strides) {
    if (images.h() % s != 0 || images.w() % s != 0) {
      throw ShapeError("image size " + std::to_string(images.h()) + "x" +
                       std::to_string(images.w()) +
                       " is not divisible by stride " + std::to_string(s));
    }
  }
}

}  // namespace

TapedForward forward_taped(Graph& g, const DetectorParams& params,
                           const DetectorConfig& cfg, Var images,
                           DomainBranch domain) {
  check_input(cfg, g.value(images));
  TapedForward out;
  out.backbone = multiscale_features(
      g, images, cfg.multiscale, [&](Graph& gr, Var x) {
        return backbone_forward(gr, params, cfg, x);
      });

  std::vector<Var> lateral(3);
  for (int l = 0; l < 3; ++l) {
    Var feat = out.backbone[static_cast<std::size_t>(l)];
    if (cfg.multiscale.scales.size() > 1) {
      feat = conv_act(g, params, cfg, std::string("reduce.") + kLevelNames[l],
                      feat, 1, 0);
    }
    lateral[static_cast<std::size_t>(l)] = conv_act(
        g, params, cfg, std::string("neck.lateral.") + kLevelNames[l], feat, 1, 0);
  }
  Var top5 = lateral[2];
  Var top4 = ops::add(g, lateral[1], ops::upsample_nearest(g, top5, 2));
  Var top3 = ops::add(g, lateral[0], ops::upsample_nearest(g, top4, 2));
  const Var tops[] = {top3, top4, top5};
  for (int l = 0; l < 3; ++l) {
    out.neck.push_back(conv_act(g, params, cfg,
                                std::string("neck.out.") + kLevelNames[l],
                                tops[l], 1, 1));
  }
  for (int l = 0; l < 3; ++l) {
    out.heads.push_back(conv(g, params, std::string("head.") + kLevelNames[l],
                             out.neck[static_cast<std::size_t>(l)], 1, 0));
  }
  if (domain != DomainBranch::kOff) {
    Var feat = out.neck[1];
    if (domain == DomainBranch::kReversed) feat = ops::gradient_reversal(g, feat);
    Var h = conv_act(g, params, cfg, "domain.conv1", feat, 1, 1);
    out.domain_logits = conv(g, params, "domain.conv2", h, 1, 0);
  }
  return out;
}

DensePredictions to_dense_predictions(const Graph& g, const TapedForward& out,
                                      const AnchorConfig& anchors) {
  DensePredictions preds;
  preds.num_classes = anchors.num_classes;
  preds.strides = anchors.strides;
  for (int l = 0; l < anchors.num_levels(); ++l) {
    preds.anchors_per_level.push_back(anchors.num_anchors(l));
    preds.levels.push_back(g.value(out.heads[static_cast<std::size_t>(l)]));
  }
  return preds;
}

ForwardResult forward(const DetectorParams& params, const DetectorConfig& cfg,
                      const Tensor& images) {
  check_input(cfg, images);
  Graph g(false);
  Var x = g.input(images);
  TapedForward out = forward_taped(g, params, cfg, x);
  ForwardResult r;
  for (Var v : out.neck) r.features.levels.push_back(g.value(v));
  r.preds = to_dense_predictions(g, out, cfg.anchors);
  return r;
}

FeaturePyramid multiscale_extract(const DetectorParams& params,
                                  const DetectorConfig& cfg,
                                  const Tensor& images) {
  check_input(cfg, images);
  Graph g(false);
  Var x = g.input(images);
  auto feats = multiscale_features(g, x, cfg.multiscale, [&](Graph& gr, Var v) {
    return backbone_forward(gr, params, cfg, v);
  });
  FeaturePyramid fp;
  for (Var v : feats) fp.levels.push_back(g.value(v));
  return fp;
}

Box decode_cell_box(double tx, double ty, double tw, double th, int gx, int gy,
                    int stride, AnchorSize anchor) {
  GridEncoding e;
  e.gx = gx;
  e.gy = gy;
  e.dx = offset_from_logit(tx);
  e.dy = offset_from_logit(ty);
  e.sw = scale_from_logit(tw);
  e.sh = scale_from_logit(th);
  return decode_grid(e, stride, anchor);
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  if (p.empty()) return p;
  const double m = *std::max_element(p.begin(), p.end());
  double z = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : p) v /= z;
  return p;
}

std::vector<DecodedCell> decode_cells(const DensePredictions& preds,
                                      const AnchorConfig& cfg, int n,
                                      double conf_threshold) {
  std::vector<DecodedCell> out;
  const int C = preds.num_classes;
  std::vector<double> logits(static_cast<std::size_t>(C));
  const double img_h = static_cast<double>(preds.levels[0].h()) * cfg.strides[0];
  const double img_w = static_cast<double>(preds.levels[0].w()) * cfg.strides[0];
  for (int l = 0; l < static_cast<int>(preds.levels.size()); ++l) {
    const Tensor& t = preds.levels[static_cast<std::size_t>(l)];
    const int stride = cfg.strides[static_cast<std::size_t>(l)];
    for (int a = 0; a < cfg.num_anchors(l); ++a) {
      const AnchorSize anchor = cfg.anchors[static_cast<std::size_t>(l)]
                                           [static_cast<std::size_t>(a)];
      for (int y = 0; y < t.h(); ++y) {
        for (int x = 0; x < t.w(); ++x) {
          const double obj = sigmoid(preds.obj(l, n, a, y, x));
          if (obj < conf_threshold) continue;
          for (int c = 0; c < C; ++c) {
            logits[static_cast<std::size_t>(c)] = preds.cls(l, n, a, c, y, x);
          }
          std::vector<double> dist = softmax(logits);
          const auto best = std::max_element(dist.begin(), dist.end());
          const double conf = obj * *best;
          if (conf < conf_threshold || conf <= 0.0) continue;
          Box b = decode_cell_box(preds.reg(l, n, a, 0, y, x),
                                  preds.reg(l, n, a, 1, y, x),
                                  preds.reg(l, n, a, 2, y, x),
                                  preds.reg(l, n, a, 3, y, x), x, y, stride,
                                  anchor);
          b = clip_box(b, img_w, img_h);
          if (!(b.w > 0.0 && b.h > 0.0)) continue;
          b.class_id = static_cast<int>(best - dist.begin());
          b.score = conf;
          out.push_back(DecodedCell{b, std::move(dist), obj, l, a, y, x});
        }
      }
    }
  }
  return out;
}

std::vector<DetectionSet> decode_predictions(const DensePredictions& preds,
                                             const AnchorConfig& cfg,
                                             double conf_threshold) {
  std::vector<DetectionSet> out(static_cast<std::size_t>(preds.batch()));
  for (int n = 0; n < preds.batch(); ++n) {
    out[static_cast<std::size_t>(n)].image_id = n;
    for (auto& cell : decode_cells(preds, cfg, n, conf_threshold)) {
      out[static_cast<std::size_t>(n)].boxes.push_back(cell.box);
    }
  }
  return out;
}

}  // namespace ssod
