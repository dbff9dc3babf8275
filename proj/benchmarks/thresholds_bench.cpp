// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "ssodlab/epoch_corresponding.hpp"
#include "ssodlab/rng.hpp"

namespace {

void BM_RecordSealCompute(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  ssod::Rng rng(1);
  std::vector<std::pair<int, double>> scores;
  for (std::size_t i = 0; i < n; ++i) scores.emplace_back(rng.uniform_int(0, 2), rng.uniform());
  const std::int64_t counts[] = {500, 300, 200};
  for (auto _ : state) {
    auto stats = ssod::EpochStats::make(3, 1);
    for (const auto& [c, s] : scores) ssod::record_score(stats, c, s);
    ssod::update_gt_counts(stats, counts);
    ssod::add_images(stats, 100, 1900);
    ssod::seal(stats);
    benchmark::DoNotOptimize(ssod::compute_thresholds(stats, 50.0));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_RecordSealCompute)->Arg(10000)->Arg(100000)->Arg(1000000)->Unit(benchmark::kMillisecond);

void BM_DomainLoss(benchmark::State& state) {
  ssod::DomainPrediction dp;
  dp.logits = ssod::Tensor(16, 1, 8, 8);
  ssod::Rng rng(2);
  for (double& v : dp.logits.values()) v = rng.normal();
  dp.domain.assign(8, 0);
  dp.domain.resize(16, 1);
  for (auto _ : state) benchmark::DoNotOptimize(ssod::domain_loss(dp));
}
BENCHMARK(BM_DomainLoss);

}  // namespace
