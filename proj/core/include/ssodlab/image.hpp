// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "ssodlab/tensor.hpp"

namespace ssod {

/// RGB image, interleaved HWC, values in [0, 1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  Image() = default;
  Image(int w, int h, float fill = 0.0f)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, fill) {}

  std::size_t index(int x, int y, int ch) const {
    return (static_cast<std::size_t>(y) * width + x) * 3 + ch;
  }
  float& at(int x, int y, int ch) { return data[index(x, y, ch)]; }
  float at(int x, int y, int ch) const { return data[index(x, y, ch)]; }

  bool operator==(const Image&) const = default;
};

/// Writes a binary PPM (P6), quantizing to 8 bits.
void write_ppm(const Image& img, const std::filesystem::path& path);
/// Reads a binary PPM (P6) with maxval 255. Throws ParseError.
Image read_ppm(const std::filesystem::path& path);

/// Round to the nearest 8-bit level; PPM round trips are exact afterwards.
void quantize(Image& img);

/// Stack images of equal size into an (N, 3, H, W) tensor of value - 0.5.
Tensor images_to_tensor(std::span<const Image> images);
Image tensor_to_image(const Tensor& t, int n);

}  // namespace ssod
