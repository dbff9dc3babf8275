// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/epoch_corresponding.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "ssodlab/errors.hpp"
#include "ssodlab/losses.hpp"
#include "ssodlab/rng.hpp"

namespace ssod {

EpochStats EpochStats::make(int num_classes, int epoch, std::size_t cap,
                            std::uint64_t reservoir_seed) {
  if (num_classes < 1) throw ConfigError("EpochStats needs at least one class");
  if (cap == 0) throw ConfigError("reservoir cap must be positive");
  EpochStats s;
  s.k = epoch;
  s.score_lists.resize(static_cast<std::size_t>(num_classes));
  s.gt_counts.assign(static_cast<std::size_t>(num_classes), 0);
  s.seen.assign(static_cast<std::size_t>(num_classes), 0);
  s.reservoir_cap = cap;
  s.reservoir_seed = reservoir_seed;
  return s;
}

void to_json(nlohmann::json& j, const EpochStats& s) {
  j = nlohmann::json{{"k", s.k},
                     {"score_lists", s.score_lists},
                     {"gt_counts", s.gt_counts},
                     {"N_l", s.N_l},
                     {"N_u", s.N_u},
                     {"sealed", s.sealed},
                     {"reservoir_cap", s.reservoir_cap},
                     {"seen", s.seen},
                     {"reservoir_seed", s.reservoir_seed}};
}

void from_json(const nlohmann::json& j, EpochStats& s) {
  j.at("k").get_to(s.k);
  j.at("score_lists").get_to(s.score_lists);
  j.at("gt_counts").get_to(s.gt_counts);
  j.at("N_l").get_to(s.N_l);
  j.at("N_u").get_to(s.N_u);
  j.at("sealed").get_to(s.sealed);
  j.at("reservoir_cap").get_to(s.reservoir_cap);
  j.at("seen").get_to(s.seen);
  j.at("reservoir_seed").get_to(s.reservoir_seed);
}

namespace {

void require_open(const EpochStats& s) {
  if (s.sealed) {
    throw StateError("epoch " + std::to_string(s.k) + " statistics are sealed");
  }
}

}  // namespace

void record_score(EpochStats& stats, int class_id, double score) {
  require_open(stats);
  if (class_id < 0 || class_id >= stats.num_classes()) {
    throw OutOfBoundsError("record_score: class " + std::to_string(class_id) +
                           " out of range");
  }
  const auto c = static_cast<std::size_t>(class_id);
  auto& list = stats.score_lists[c];
  const std::uint64_t seen = stats.seen[c]++;
  if (list.size() < stats.reservoir_cap) {
    list.push_back(score);
    return;
  }
  // Algorithm R with a stateless hash in place of a stream, so the kept
  // sample depends only on the offered sequence.
  const std::uint64_t j =
      derive_seed({stats.reservoir_seed, static_cast<std::uint64_t>(stats.k), c, seen}) %
      (seen + 1);
  if (j < stats.reservoir_cap) list[static_cast<std::size_t>(j)] = score;
}

void record_scores(EpochStats& stats, std::span<const PseudoLabel> labels) {
  require_open(stats);
  for (const auto& pl : labels) {
    const auto best = std::max_element(pl.class_dist.begin(), pl.class_dist.end());
    const int c = pl.class_dist.empty()
                      ? pl.box.class_id
                      : static_cast<int>(best - pl.class_dist.begin());
    record_score(stats, c, pl.score);
  }
}

void update_gt_counts(EpochStats& stats, std::span<const std::int64_t> presented) {
  require_open(stats);
  if (presented.size() != stats.gt_counts.size()) {
    throw ShapeError("update_gt_counts: expected " +
                     std::to_string(stats.gt_counts.size()) + " classes, got " +
                     std::to_string(presented.size()));
  }
  for (std::size_t c = 0; c < presented.size(); ++c) {
    if (presented[c] < 0) throw ConfigError("update_gt_counts: negative count");
    stats.gt_counts[c] += presented[c];
  }
}

void add_images(EpochStats& stats, std::int64_t labeled, std::int64_t unlabeled) {
  require_open(stats);
  if (labeled < 0 || unlabeled < 0) throw ConfigError("add_images: negative count");
  stats.N_l += labeled;
  stats.N_u += unlabeled;
}

void seal(EpochStats& stats) {
  for (auto& list : stats.score_lists) {
    std::sort(list.begin(), list.end(), std::greater<>());
  }
  stats.sealed = true;
}

std::int64_t round_ratio(std::int64_t num, std::int64_t den) {
  return (2 * num + den) / (2 * den);
}

ThresholdSchedule compute_thresholds(const EpochStats& stats, double alpha,
                                     double fallback_tau1, double fallback_tau2) {
  if (!stats.sealed) {
    throw StateError("compute_thresholds: epoch " + std::to_string(stats.k) +
                     " statistics are not sealed");
  }
  if (!(alpha >= 0.0 && alpha <= 100.0)) {
    throw ConfigError("epoch_corresponding.alpha must lie in [0, 100]");
  }
  ThresholdSchedule th;
  th.epoch = stats.k + 1;
  th.alpha = alpha;
  const std::int64_t nl = std::max<std::int64_t>(1, stats.N_l);
  const std::int64_t nu = std::max<std::int64_t>(1, stats.N_u);
  for (std::size_t c = 0; c < stats.score_lists.size(); ++c) {
    const auto& list = stats.score_lists[c];
    if (list.empty()) {
      th.tau1.push_back(fallback_tau1);
      th.tau2.push_back(fallback_tau2);
      continue;
    }
    const auto len = static_cast<std::int64_t>(list.size());
    const std::int64_t r1 = round_ratio(stats.gt_counts[c] * nu, nl);
    const auto r2 = static_cast<std::int64_t>(
        std::round(alpha * static_cast<double>(r1) / 100.0));
    const std::int64_t k1 = std::clamp<std::int64_t>(r1, 1, len);
    const std::int64_t k2 = std::clamp<std::int64_t>(r2, 1, len);
    th.tau1.push_back(list[static_cast<std::size_t>(k1 - 1)]);
    th.tau2.push_back(list[static_cast<std::size_t>(k2 - 1)]);
  }
  return th;
}

Tensor DomainPrediction::probabilities() const {
  Tensor p(logits.shape());
  // Saturated logits would round to exactly 0 or 1.
  const double lo = std::nextafter(0.0, 1.0), hi = std::nextafter(1.0, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::clamp(sigmoid(logits[i]), lo, hi);
  return p;
}

namespace {

void check_domain(const DomainPrediction& dp) {
  if (dp.logits.c() != 1 || static_cast<int>(dp.domain.size()) != dp.logits.n()) {
    throw ShapeError("domain prediction " + dp.logits.shape().str() + " with " +
                     std::to_string(dp.domain.size()) + " domain flags");
  }
  for (int d : dp.domain) {
    if (d != 0 && d != 1) throw ConfigError("domain flags must be 0 or 1");
  }
}

}  // namespace

DomainLoss domain_loss(const DomainPrediction& dp) {
  check_domain(dp);
  DomainLoss out;
  out.grad = Tensor(dp.logits.shape());
  const std::size_t per = static_cast<std::size_t>(dp.logits.h()) * dp.logits.w();
  const double norm = 1.0 / static_cast<double>(std::max<std::size_t>(1, dp.logits.size()));
  for (int n = 0; n < dp.logits.n(); ++n) {
    const double d = dp.domain[static_cast<std::size_t>(n)];
    for (std::size_t i = 0; i < per; ++i) {
      const std::size_t idx = static_cast<std::size_t>(n) * per + i;
      const double z = dp.logits[idx];
      out.value += bce_with_logit(z, d);
      out.grad[idx] = (sigmoid(z) - d) * norm;
    }
  }
  out.value *= norm;
  return out;
}

double domain_accuracy(const DomainPrediction& dp) {
  check_domain(dp);
  if (dp.logits.size() == 0) return 0.0;
  const std::size_t per = static_cast<std::size_t>(dp.logits.h()) * dp.logits.w();
  std::size_t correct = 0;
  for (int n = 0; n < dp.logits.n(); ++n) {
    const bool d = dp.domain[static_cast<std::size_t>(n)] == 1;
    for (std::size_t i = 0; i < per; ++i) {
      if ((dp.logits[static_cast<std::size_t>(n) * per + i] > 0.0) == d) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(dp.logits.size());
}

}  // namespace ssod
