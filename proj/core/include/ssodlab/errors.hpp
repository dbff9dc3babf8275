// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ssod {

/// Tensor or image dimensions that violate an operation's precondition.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid configuration: unknown keys, bad types, inconsistent thresholds.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input file (COCO JSON, config file, manifest).
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation invoked in the wrong lifecycle state (e.g. unsealed statistics).
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Checkpoint checksum or header mismatch.
class IntegrityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class OutOfBoundsError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace ssod
