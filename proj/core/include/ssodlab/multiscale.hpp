// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "ssodlab/autograd.hpp"
#include "ssodlab/tensor.hpp"

namespace ssod {

/// Image scales for the multi-scale representation, as integer multiples of
/// the default input size. Scale s produces s*s default-size tiles.
struct ScaleSpec {
  std::vector<int> scales{1, 2};
  int default_size = 64;

  /// Throws ConfigError unless every multiplier is a positive integer and 1 is
  /// present.
  void validate() const;
  /// Scales with 1 first, others in their listed order.
  std::vector<int> ordered() const;
};

/// Row-major default-size tiles of one scaled image.
struct TileSet {
  int tile_size = 0;
  int per_side = 0;
  std::vector<Tensor> tiles;
  std::vector<std::pair<int, int>> origins;  // (x, y) in scaled-image pixels
};

/// Bilinear resize of an image batch to target_size x target_size. The target
/// must be a positive multiple of `stride_multiple`.
Tensor interpolate_image(const Tensor& image, int target_size,
                         int stride_multiple = 1);

/// Throws ShapeError unless the image side is a multiple of default_size.
TileSet split_tiles(const Tensor& image, int default_size);
/// Stitch tiles back into the full image.
Tensor reassemble_tiles(const TileSet& tiling);

/// Spatial mosaic of per-tile feature grids, in tile order. All grids must
/// share the same shape.
Tensor merge_tile_features(const std::vector<Tensor>& tile_features,
                           const TileSet& tiling);

/// Max-pool every merged grid down to the base spatial size (window = stride =
/// size ratio) and concatenate along channels, base first.
Tensor pool_concat_features(const Tensor& base,
                            const std::vector<Tensor>& merged_scales);

/// Maps a batch of default-size images to one feature grid per backbone stage.
using BackboneFn = std::function<std::vector<Var>(Graph&, Var)>;

/// Differentiable multi-scale pipeline: for every scale, interpolate, tile,
/// run the shared backbone on all tiles as one batch, merge tiles per stage,
/// max-pool to the base grid and concatenate channels (base scale first).
/// With a single scale the backbone output is returned unchanged.
std::vector<Var> multiscale_features(Graph& g, Var images, const ScaleSpec& spec,
                                     const BackboneFn& backbone);

}  // namespace ssod
