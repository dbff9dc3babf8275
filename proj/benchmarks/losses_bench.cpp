// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "ssodlab/detector.hpp"
#include "ssodlab/image.hpp"
#include "ssodlab/losses.hpp"
#include "ssodlab/pseudo_label.hpp"
#include "ssodlab/synthetic.hpp"

namespace {

struct Inputs {
  ssod::DetectorConfig dcfg;
  ssod::DensePredictions preds;
  ssod::DenseTargets targets;
  ssod::PseudoTargets pseudo;
  ssod::ThresholdSchedule th = ssod::ThresholdSchedule::uniform(3, 0.3, 0.7);
};

// Head outputs of an untrained detector on 8 synthetic scenes, with the scene
// boxes as both ground truth and pseudo labels.
const Inputs& inputs() {
  static const Inputs in = [] {
    Inputs r;
    r.dcfg.multiscale.scales = {1};
    const auto ds = ssod::render_dataset(ssod::SyntheticSceneSpec{}, 8, 1);
    const auto params = ssod::make_detector_params(r.dcfg, 1);
    r.preds = ssod::forward(params, r.dcfg, ssod::images_to_tensor(ds.images)).preds;
    std::vector<ssod::DetectionSet> gt;
    std::vector<ssod::PseudoLabelList> labels;
    for (std::size_t i = 0; i < ds.images.size(); ++i) {
      gt.push_back(ds.meta.ground_truth(i));
      ssod::PseudoLabelList l;
      for (auto b : gt.back().boxes) {
        b.score = 0.1 + 0.8 * static_cast<double>(l.size() % 5) / 4.0;
        std::vector<double> dist(3, 0.1);
        dist[static_cast<std::size_t>(b.class_id)] = 0.8;
        l.push_back({b, b.score, dist, 0.9});
      }
      labels.push_back(l);
    }
    r.targets = ssod::build_supervised_targets(gt, r.dcfg.anchors, 64);
    r.pseudo = ssod::assign_pseudo_targets(labels, r.dcfg.anchors, 64);
    return r;
  }();
  return in;
}

void BM_SupervisedLoss(benchmark::State& state) {
  const auto& in = inputs();
  for (auto _ : state) benchmark::DoNotOptimize(ssod::supervised_loss(in.preds, in.targets, in.dcfg.anchors));
}
BENCHMARK(BM_SupervisedLoss)->Unit(benchmark::kMicrosecond);

void BM_UnsupervisedLoss(benchmark::State& state) {
  const auto& in = inputs();
  for (auto _ : state)
    benchmark::DoNotOptimize(ssod::unsupervised_loss(in.preds, in.pseudo, in.th, in.dcfg.anchors));
}
BENCHMARK(BM_UnsupervisedLoss)->Unit(benchmark::kMicrosecond);

void BM_PseudoLabels(benchmark::State& state) {
  const auto& in = inputs();
  for (auto _ : state)
    for (int n = 0; n < in.preds.batch(); ++n)
      benchmark::DoNotOptimize(ssod::pseudo_labels_from_predictions(in.preds, in.dcfg.anchors, n));
}
BENCHMARK(BM_PseudoLabels)->Unit(benchmark::kMicrosecond);

}  // namespace
