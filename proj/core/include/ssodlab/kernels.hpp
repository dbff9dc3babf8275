// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <vector>

#include "ssodlab/tensor.hpp"

// Plain tensor kernels shared by the differentiable ops and the multi-scale
// representation functions.
namespace ssod::kernels {

/// Bilinear resize with half-pixel centers (corner alignment off).
Tensor resize_bilinear(const Tensor& x, int out_h, int out_w);
/// Adjoint of resize_bilinear: maps a gradient on the output grid back onto
/// an (in_h, in_w) grid.
Tensor resize_bilinear_backward(const Tensor& grad_out, int in_h, int in_w);

Tensor split_tiles(const Tensor& x, int tile);
Tensor merge_tiles(const Tensor& tiles, int per_side);

/// Max pool with window == stride == k. `argmax`, when given, receives the
/// flat input index chosen for every output element.
Tensor max_pool(const Tensor& x, int k, std::vector<std::size_t>* argmax = nullptr);

Tensor concat_channels(std::span<const Tensor> parts);

Tensor upsample_nearest(const Tensor& x, int factor);

}  // namespace ssod::kernels
