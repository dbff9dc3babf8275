// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <algorithm>

namespace fixture {

ssod::Box random_box(ssod::Rng& rng, double extent, double min_side, double max_side,
                     int num_classes) {
  ssod::Box b;
  b.w = rng.uniform(min_side, max_side);
  b.h = rng.uniform(min_side, max_side);
  b.cx = rng.uniform(0.0, extent);
  b.cy = rng.uniform(0.0, extent);
  b.class_id = rng.uniform_int(0, num_classes - 1);
  b.score = rng.uniform(0.0, 1.0);
  return b;
}

ssod::DensePredictions random_predictions(const ssod::AnchorConfig& cfg, int batch, int grid0,
                                          std::uint64_t seed, double scale) {
  ssod::Rng rng(seed);
  ssod::DensePredictions p;
  p.num_classes = cfg.num_classes;
  p.strides = cfg.strides;
  for (int l = 0; l < cfg.num_levels(); ++l) {
    const int g = grid0 * cfg.strides[0] / cfg.strides[static_cast<std::size_t>(l)];
    const int a = cfg.num_anchors(l);
    p.anchors_per_level.push_back(a);
    ssod::Tensor t(batch, a * cfg.channels_per_anchor(), g, g);
    for (auto& v : t.values()) v = rng.uniform(-scale, scale);
    p.levels.push_back(std::move(t));
  }
  return p;
}

ssod::DenseTargets random_targets(const ssod::AnchorConfig& cfg, int batch, int image_size,
                                  std::uint64_t seed) {
  ssod::Rng rng(seed);
  std::vector<ssod::DetectionSet> gt(static_cast<std::size_t>(batch));
  for (auto& d : gt) {
    const int k = rng.uniform_int(0, 5);
    for (int i = 0; i < k; ++i) {
      d.boxes.push_back(random_box(rng, image_size, 4.0, image_size / 2.0, cfg.num_classes));
    }
  }
  return ssod::build_supervised_targets(gt, cfg, image_size);
}

ssod::PseudoTargets random_pseudo_targets(const ssod::AnchorConfig& cfg, int batch, int grid0,
                                          std::uint64_t seed) {
  ssod::Rng rng(seed);
  ssod::PseudoTargets pt = ssod::empty_pseudo_targets(cfg, batch, grid0, grid0);
  for (std::size_t l = 0; l < pt.levels.size(); ++l) {
    auto& lt = pt.levels[l];
    const double extent = grid0 * cfg.strides[0];
    for (std::size_t cell = 0; cell < lt.cells(); ++cell) {
      if (rng.uniform() < 0.33) continue;
      lt.p[cell] = rng.uniform(0.001, 1.0);
      double sum = 0.0;
      for (int c = 0; c < lt.c; ++c) {
        const double v = rng.uniform(0.0, 1.0);
        lt.soft_cls[cell * static_cast<std::size_t>(lt.c) + static_cast<std::size_t>(c)] = v;
        sum += v;
      }
      for (int c = 0; c < lt.c; ++c) {
        lt.soft_cls[cell * static_cast<std::size_t>(lt.c) + static_cast<std::size_t>(c)] /= sum;
      }
      lt.soft_reg[cell] = random_box(rng, extent, 2.0, extent / 2.0, lt.c);
      lt.soft_obj_target[cell] = rng.uniform() < 0.5 ? 1.0 : rng.uniform(0.5, 1.0);
      lt.soft_obj[cell] = rng.uniform() < 0.2 ? rng.uniform(0.991, 1.0) : rng.uniform(0.0, 1.0);
      lt.label_index[cell] = 0;
    }
  }
  return pt;
}

ssod::ThresholdSchedule random_schedule(int num_classes, std::uint64_t seed) {
  ssod::Rng rng(seed);
  ssod::ThresholdSchedule th;
  for (int c = 0; c < num_classes; ++c) {
    double a = rng.uniform(), b = rng.uniform();
    if (a > b) std::swap(a, b);
    th.tau1.push_back(a);
    th.tau2.push_back(b);
  }
  return th;
}

}  // namespace fixture
