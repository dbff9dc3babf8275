// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string>

namespace ssod {

std::uint64_t splitmix64(std::uint64_t x);

/// Mixes an arbitrary list of integers into a 64-bit seed.
std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts);

/// Deterministic generator with helpers for the draws used across the
/// library. Wraps mt19937_64, whose textual state round-trips exactly.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0);
  /// Uniform integer in [lo, hi].
  int uniform_int(int lo, int hi);
  double normal(double mean = 0.0, double stddev = 1.0);
  bool bernoulli(double p);

  std::mt19937_64& engine() { return engine_; }

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

}  // namespace ssod
