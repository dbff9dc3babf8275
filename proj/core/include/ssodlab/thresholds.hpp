// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

namespace ssod {

/// Per-class low/high pseudo-label score thresholds for one epoch.
struct ThresholdSchedule {
  int epoch = 0;
  std::vector<double> tau1;
  std::vector<double> tau2;
  double alpha = 50.0;

  /// Uniform thresholds for every class.
  static ThresholdSchedule uniform(int num_classes, double tau1, double tau2);

  int num_classes() const { return static_cast<int>(tau1.size()); }
  /// Throws ConfigError unless 0 <= tau1 <= tau2 <= 1 for every class.
  void validate() const;

  bool operator==(const ThresholdSchedule&) const = default;
};

}  // namespace ssod
