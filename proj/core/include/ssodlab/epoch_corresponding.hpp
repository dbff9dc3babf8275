// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ssodlab/autograd.hpp"
#include "ssodlab/pseudo_label.hpp"
#include "ssodlab/thresholds.hpp"

namespace ssod {

/// Per-epoch teacher score lists and presented-annotation counts.
struct EpochStats {
  int k = 0;
  std::vector<std::vector<double>> score_lists;  ///< P_c, one per class
  std::vector<std::int64_t> gt_counts;           ///< n_c
  std::int64_t N_l = 0;
  std::int64_t N_u = 0;
  bool sealed = false;
  std::size_t reservoir_cap = 100000;
  std::vector<std::uint64_t> seen;  ///< scores offered per class
  std::uint64_t reservoir_seed = 0;

  static EpochStats make(int num_classes, int epoch,
                         std::size_t reservoir_cap = 100000,
                         std::uint64_t reservoir_seed = 0);
  int num_classes() const { return static_cast<int>(score_lists.size()); }

  bool operator==(const EpochStats&) const = default;
};

void to_json(nlohmann::json& j, const EpochStats& s);
void from_json(const nlohmann::json& j, EpochStats& s);

/// Appends each label's score to the list of its argmax class. Beyond the
/// reservoir cap a deterministic reservoir sample is kept. Throws StateError
/// on sealed stats.
void record_scores(EpochStats& stats, std::span<const PseudoLabel> labels);
void record_score(EpochStats& stats, int class_id, double score);

/// Adds per-class counts of annotations presented to the labeled branch.
void update_gt_counts(EpochStats& stats, std::span<const std::int64_t> presented);

/// Adds to the labeled / unlabeled image counters.
void add_images(EpochStats& stats, std::int64_t labeled, std::int64_t unlabeled);

/// Sorts every score list descending and freezes the stats.
void seal(EpochStats& stats);

/// Round half away from zero of the non-negative rational num / den.
std::int64_t round_ratio(std::int64_t num, std::int64_t den);

/// Per class: r1 = round(n_c * N_u / N_l), r2 = round(alpha/100 * r1), both
/// clamped to [1, |P_c|]; tau1 = P_c[r1], tau2 = P_c[r2] (1-based ranks on
/// the descending list). Empty lists give the fallback pair, (0, 1) by
/// default. Zero image counters are treated as 1. Throws StateError unless
/// sealed.
ThresholdSchedule compute_thresholds(const EpochStats& stats, double alpha = 50.0,
                                     double fallback_tau1 = 0.0,
                                     double fallback_tau2 = 1.0);

/// Domain classifier output over feature locations.
struct DomainPrediction {
  Tensor logits;              ///< (N, 1, H, W)
  std::vector<int> domain;    ///< D per batch item: 0 labeled, 1 unlabeled

  /// sigmoid(logits), computed stably; strictly inside (0, 1) for finite
  /// logits of moderate size.
  Tensor probabilities() const;
};

struct DomainLoss {
  double value = 0.0;
  Tensor grad;  ///< dL/dlogits
};

/// Binary cross-entropy between p(h,w) and D, averaged over all locations.
DomainLoss domain_loss(const DomainPrediction& dp);

/// Fraction of locations whose thresholded prediction equals D.
double domain_accuracy(const DomainPrediction& dp);

/// Gradient reversal: identity forward, gradient multiplied by -1 backward.
inline Var grl_transform(Graph& g, Var features) {
  return ops::gradient_reversal(g, features, 1.0);
}

}  // namespace ssod
