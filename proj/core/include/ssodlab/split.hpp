// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ssodlab/coco.hpp"

namespace ssod {

struct SplitManifest {
  std::vector<std::int64_t> labeled;
  std::vector<std::int64_t> unlabeled;
  std::vector<std::int64_t> validation;
  double labeled_pct = 0.0;
  std::uint64_t fold_seed = 0;

  bool operator==(const SplitManifest&) const = default;
};

void to_json(nlohmann::json& j, const SplitManifest& m);
void from_json(const nlohmann::json& j, SplitManifest& m);

struct SplitOptions {
  double labeled_pct = 5.0;
  std::uint64_t fold_seed = 0;
  /// Validation size; a negative count means round(val_fraction * N).
  int val_count = -1;
  double val_fraction = 0.1;
  /// Seed of the validation draw, independent of the fold.
  std::uint64_t val_seed = 0x5eed;
};

/// Validation images are drawn first (independently of fold_seed). The rest
/// is split into round(labeled_pct% * N_train) labeled images stratified by
/// class-presence signature, then patched so that every class present in the
/// training pool appears in the labeled set when that is possible.
SplitManifest make_split(const Dataset& ds, const SplitOptions& opts);

}  // namespace ssod
