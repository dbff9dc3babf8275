// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "ssodlab/config.hpp"
#include "ssodlab/trainer.hpp"

namespace ssod {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Header fields readable without loading the arrays.
struct CheckpointMeta {
  std::uint32_t version = 0;
  std::uint64_t config_hash = 0;
  int epoch = 0;
  std::int64_t step = 0;
  std::string phase;
  bool has_teacher = false;
  nlohmann::json config;  ///< flat config the run was started with
};

/// Layout: magic "SSODCKPT", u32 version, u64 header length, header JSON,
/// u32 array count, arrays (u32 name length, name, 4 x i32 shape, f64 data),
/// then a CRC-32 of everything before it. Writes via a temporary file.
void save_checkpoint(const std::filesystem::path& path, const TrainerState& state,
                     const TrainConfig& cfg);

/// Reads the header. Throws IntegrityError on a bad magic, version or
/// checksum.
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

/// Restores the full trainer state. Throws ConfigError when the checkpoint
/// was written under a different config hash, IntegrityError on corruption
/// and ShapeError when arrays do not fit the detector config.
TrainerState load_checkpoint(const std::filesystem::path& path, const TrainConfig& cfg,
                             const DetectorConfig& dcfg);

/// The config stored in a checkpoint.
TrainConfig checkpoint_config(const std::filesystem::path& path);

/// Teacher weights if present, else the student's.
DetectorParams checkpoint_eval_params(const std::filesystem::path& path,
                                      const DetectorConfig& dcfg);

}  // namespace ssod
