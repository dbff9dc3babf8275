// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/multiscale.hpp"

#include <algorithm>
#include <string>

#include "ssodlab/errors.hpp"
#include "ssodlab/kernels.hpp"

namespace ssod {

void ScaleSpec::validate() const {
  if (scales.empty()) throw ConfigError("multiscale.scales is empty");
  if (default_size <= 0) throw ConfigError("multiscale.default_size must be > 0");
  for (int s : scales) {
    if (s <= 0) throw ConfigError("multiscale.scales must be positive integers");
  }
  if (std::count(scales.begin(), scales.end(), 1) != 1) {
    throw ConfigError("multiscale.scales must contain 1 exactly once");
  }
}

std::vector<int> ScaleSpec::ordered() const {
  std::vector<int> out{1};
  for (int s : scales) {
    if (s != 1) out.push_back(s);
  }
  return out;
}

Tensor interpolate_image(const Tensor& image, int target_size,
                         int stride_multiple) {
  if (target_size <= 0 || stride_multiple <= 0 ||
      target_size % stride_multiple != 0) {
    throw ShapeError("interpolate_image: target size " +
                     std::to_string(target_size) +
                     " is not a positive multiple of " +
                     std::to_string(stride_multiple));
  }
  return kernels::resize_bilinear(image, target_size, target_size);
}

TileSet split_tiles(const Tensor& image, int default_size) {
  if (default_size <= 0 || image.h() != image.w() ||
      image.h() % default_size != 0) {
    throw ShapeError("split_tiles: image " + std::to_string(image.h()) + "x" +
                     std::to_string(image.w()) +
                     " is not a square multiple of " +
                     std::to_string(default_size));
  }
  TileSet ts;
  ts.tile_size = default_size;
  ts.per_side = image.h() / default_size;
  for (int ty = 0; ty < ts.per_side; ++ty) {
    for (int tx = 0; tx < ts.per_side; ++tx) {
      Tensor tile(image.n(), image.c(), default_size, default_size);
      for (int b = 0; b < image.n(); ++b)
        for (int c = 0; c < image.c(); ++c)
          for (int y = 0; y < default_size; ++y) {
            const double* src = image.data() +
                                image.index(b, c, ty * default_size + y,
                                            tx * default_size);
            std::copy_n(src, default_size, tile.data() + tile.index(b, c, y, 0));
          }
      ts.tiles.push_back(std::move(tile));
      ts.origins.emplace_back(tx * default_size, ty * default_size);
    }
  }
  return ts;
}

Tensor reassemble_tiles(const TileSet& tiling) {
  return merge_tile_features(tiling.tiles, tiling);
}

Tensor merge_tile_features(const std::vector<Tensor>& tile_features,
                           const TileSet& tiling) {
  const std::size_t expected =
      static_cast<std::size_t>(tiling.per_side) * tiling.per_side;
  if (tile_features.size() != expected || tile_features.empty()) {
    throw ShapeError("merge_tile_features: expected " +
                     std::to_string(expected) + " tiles, got " +
                     std::to_string(tile_features.size()));
  }
  const Shape4 s = tile_features.front().shape();
  for (const auto& t : tile_features) {
    if (!(t.shape() == s) || s.h != s.w) {
      throw ShapeError("merge_tile_features: mismatched tile grid " +
                       t.shape().str() + " vs " + s.str());
    }
  }
  const int f = s.h;
  const int side = tiling.per_side;
  Tensor out(s.n, s.c, f * side, f * side);
  for (std::size_t t = 0; t < tile_features.size(); ++t) {
    const int ty = static_cast<int>(t) / side;
    const int tx = static_cast<int>(t) % side;
    const Tensor& src = tile_features[t];
    for (int b = 0; b < s.n; ++b)
      for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < f; ++y) {
          std::copy_n(src.data() + src.index(b, c, y, 0), f,
                      out.data() + out.index(b, c, ty * f + y, tx * f));
        }
  }
  return out;
}

Tensor pool_concat_features(const Tensor& base,
                            const std::vector<Tensor>& merged_scales) {
  std::vector<Tensor> parts{base};
  for (const auto& m : merged_scales) {
    if (m.h() % base.h() != 0 || m.w() % base.w() != 0 ||
        m.h() / base.h() != m.w() / base.w()) {
      throw ShapeError("pool_concat_features: grid " + m.shape().str() +
                       " is not an integer multiple of " + base.shape().str());
    }
    parts.push_back(kernels::max_pool(m, m.h() / base.h()));
  }
  return kernels::concat_channels(parts);
}

std::vector<Var> multiscale_features(Graph& g, Var images, const ScaleSpec& spec,
                                     const BackboneFn& backbone) {
  spec.validate();
  const std::vector<int> order = spec.ordered();
  if (order.size() == 1) return backbone(g, images);
  const Tensor& img = g.value(images);
  if (img.h() != spec.default_size || img.w() != spec.default_size) {
    throw ShapeError("multiscale_features: input " + img.shape().str() +
                     " is not at default size " +
                     std::to_string(spec.default_size));
  }
  std::vector<Var> base = backbone(g, images);

  std::vector<std::vector<Var>> per_stage(base.size());
  for (std::size_t st = 0; st < base.size(); ++st) per_stage[st].push_back(base[st]);

  for (std::size_t i = 1; i < order.size(); ++i) {
    const int s = order[i];
    Var scaled = ops::resize_bilinear(g, images, s * spec.default_size,
                                      s * spec.default_size);
    Var tiles = ops::split_tiles(g, scaled, spec.default_size);
    std::vector<Var> feats = backbone(g, tiles);
    for (std::size_t st = 0; st < feats.size(); ++st) {
      Var merged = ops::merge_tiles(g, feats[st], s);
      per_stage[st].push_back(ops::max_pool(g, merged, s));
    }
  }
  std::vector<Var> out;
  out.reserve(base.size());
  for (auto& parts : per_stage) out.push_back(ops::concat_channels(g, parts));
  return out;
}

}  // namespace ssod
