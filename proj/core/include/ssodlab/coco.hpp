// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ssodlab/geometry.hpp"
#include "ssodlab/image.hpp"

namespace ssod {

struct DatasetImage {
  std::int64_t id = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  std::vector<Box> boxes;  ///< centre format, contiguous class ids

  bool operator==(const DatasetImage&) const = default;
};

/// Annotated image collection; class ids are contiguous in [0, C).
struct Dataset {
  std::vector<std::string> class_names;
  std::vector<std::int64_t> category_ids;  ///< original COCO id per class
  std::vector<DatasetImage> images;
  std::filesystem::path image_root;  ///< directory file names resolve against

  int num_classes() const { return static_cast<int>(class_names.size()); }
  /// Index into `images` of an image id; throws OutOfBoundsError.
  std::size_t index_of(std::int64_t image_id) const;
  DetectionSet ground_truth(std::size_t index) const;
  Image load_image(std::size_t index) const;
};

/// Parses COCO detection JSON ("images", "annotations", "categories";
/// bbox = [x, y, width, height]). Category ids are remapped to [0, C) in
/// ascending original-id order. Errors name the offending record index.
Dataset load_coco_annotations(const std::filesystem::path& path);
Dataset parse_coco(const std::string& json_text);

/// Serializes to COCO JSON. Scores are not written.
std::string export_coco(const Dataset& ds);
void write_coco(const Dataset& ds, const std::filesystem::path& path);

}  // namespace ssod
