// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "ssodlab/coco.hpp"
#include "ssodlab/image.hpp"

namespace ssod {

/// Procedural scenes of plant-like shapes on a soil texture.
struct SyntheticSceneSpec {
  int canvas = 64;
  int min_objects = 1;
  int max_objects = 6;
  double size_min = 0.05;  ///< fraction of the canvas side
  double size_max = 0.4;
  std::vector<double> class_weights{1.0, 1.0, 1.0};
  double hue_shift_deg = 0.0;
  double blur_sigma = 0.0;

  static const std::vector<std::string>& class_names();
  int num_classes() const { return static_cast<int>(class_weights.size()); }
  /// Same scene distribution with hue +40 degrees and blur sigma 1.5.
  SyntheticSceneSpec shifted() const;
  void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticSceneSpec& s);
void from_json(const nlohmann::json& j, SyntheticSceneSpec& s);

struct SyntheticScene {
  Image image;            ///< quantized to 8 bits
  std::vector<Box> boxes;
  /// Per object, the pixel bound of its rendered mask (corner format
  /// x0, y0, x1, y1 with exclusive upper ends), before occlusion.
  std::vector<std::array<int, 4>> mask_bounds;
};

/// Renders one scene; fully determined by (spec, seed).
SyntheticScene render_scene(const SyntheticSceneSpec& spec, std::uint64_t seed);

/// Rotates the hue of every pixel by `degrees` (HSV round trip).
void rotate_hue(Image& img, double degrees);

struct InMemoryDataset {
  Dataset meta;
  std::vector<Image> images;
};

/// Renders n scenes; image i uses seed derive_seed(seed, i) and gets id
/// id_offset + i.
InMemoryDataset render_dataset(const SyntheticSceneSpec& spec, int n,
                               std::uint64_t seed, std::int64_t id_offset = 0);

/// Writes images/ (PPM), annotations.json and manifest.json under out_dir and
/// returns the manifest.
nlohmann::json gen_synthetic_dataset(const SyntheticSceneSpec& spec, int n,
                                     std::uint64_t seed,
                                     const std::filesystem::path& out_dir);

/// Loads every image of a dataset into memory.
InMemoryDataset load_dataset(const std::filesystem::path& annotations);

}  // namespace ssod
