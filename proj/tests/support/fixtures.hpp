// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

// Random inputs shared by the unit and acceptance tests.

#pragma once

#include <cstdint>
#include <vector>

#include "ssodlab/detector.hpp"
#include "ssodlab/losses.hpp"
#include "ssodlab/rng.hpp"

namespace fixture {

ssod::Box random_box(ssod::Rng& rng, double extent = 64.0, double min_side = 1.0,
                     double max_side = 32.0, int num_classes = 3);

/// Head outputs for a (grid0 x grid0) level-0 grid, logits uniform in
/// [-scale, scale].
ssod::DensePredictions random_predictions(const ssod::AnchorConfig& cfg, int batch, int grid0,
                                          std::uint64_t seed, double scale = 2.0);

ssod::DenseTargets random_targets(const ssod::AnchorConfig& cfg, int batch, int image_size,
                                  std::uint64_t seed);

/// Roughly a third of the cells get p = 0, the rest p uniform in (0, 1);
/// soft_obj exceeds 0.99 on some cells.
ssod::PseudoTargets random_pseudo_targets(const ssod::AnchorConfig& cfg, int batch, int grid0,
                                          std::uint64_t seed);

ssod::ThresholdSchedule random_schedule(int num_classes, std::uint64_t seed);

}  // namespace fixture
