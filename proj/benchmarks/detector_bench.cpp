// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "ssodlab/detector.hpp"
#include "ssodlab/image.hpp"
#include "ssodlab/synthetic.hpp"
#include "ssodlab/trainer.hpp"

namespace {

const ssod::InMemoryDataset& scenes() {
  static const auto ds = ssod::render_dataset(ssod::SyntheticSceneSpec{}, 64, 2);
  return ds;
}

// Arg 0: largest scale multiplier (1 or 2).
void BM_Forward(benchmark::State& state) {
  ssod::DetectorConfig dcfg;
  dcfg.multiscale.scales = state.range(0) == 1 ? std::vector<int>{1} : std::vector<int>{1, 2};
  const auto params = ssod::make_detector_params(dcfg, 1);
  const std::vector<ssod::Image> batch(scenes().images.begin(), scenes().images.begin() + 8);
  const auto x = ssod::images_to_tensor(batch);
  for (auto _ : state) benchmark::DoNotOptimize(ssod::forward(params, dcfg, x));
  state.SetItemsProcessed(state.iterations() * 8);
}
BENCHMARK(BM_Forward)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

struct Training {
  ssod::TrainConfig cfg;
  ssod::TrainData data;
  ssod::DetectorConfig dcfg;
};

Training training(int max_scale) {
  Training t;
  t.cfg.scales = max_scale == 1 ? std::vector<int>{1} : std::vector<int>{1, 2};
  t.cfg.labeled_pct = 25.0;
  t.cfg.val_count = 8;
  ssod::SplitOptions so;
  so.labeled_pct = t.cfg.labeled_pct;
  so.val_count = t.cfg.val_count;
  t.data = ssod::make_train_data(scenes(), ssod::make_split(scenes().meta, so));
  t.dcfg = t.cfg.detector(t.data.num_classes);
  return t;
}

void BM_BurninStep(benchmark::State& state) {
  const auto t = training(static_cast<int>(state.range(0)));
  const ssod::BatchSource src(t.cfg, t.data);
  auto st = ssod::init_state(t.cfg, t.dcfg);
  int step = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ssod::burnin_step(st, t.cfg, t.dcfg, src.labeled(0, step % 4), src.unlabeled(0, step % 4)));
    ++step;
  }
}
BENCHMARK(BM_BurninStep)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

void BM_TrainStep(benchmark::State& state) {
  const auto t = training(static_cast<int>(state.range(0)));
  const ssod::BatchSource src(t.cfg, t.data);
  auto st = ssod::init_state(t.cfg, t.dcfg);
  st.teacher = st.student;
  st.has_teacher = true;
  st.phase = ssod::Phase::kSsod;
  st.schedule = ssod::ThresholdSchedule::uniform(t.data.num_classes, 0.2, 0.5);
  st.schedule_sealed = true;
  st.stats = ssod::EpochStats::make(t.data.num_classes, 1);
  int step = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        ssod::train_step(st, t.cfg, t.dcfg, src.labeled(1, step % 4), src.unlabeled(1, step % 4)));
    ++step;
  }
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(2)->Unit(benchmark::kMillisecond);

}  // namespace
