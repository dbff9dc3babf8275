// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "ssodlab/errors.hpp"

namespace ssod::kernels {
namespace {

struct Tap {
  int i0;
  int i1;
  double l1;  // weight of i1; i0 gets 1 - l1
};

// Half-pixel-center source coordinates, clamped at the borders.
std::vector<Tap> bilinear_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    double src = (o + 0.5) * ratio - 0.5;
    if (src < 0.0) src = 0.0;
    int i0 = static_cast<int>(std::floor(src));
    if (i0 > in - 1) i0 = in - 1;
    const int i1 = std::min(i0 + 1, in - 1);
    taps[static_cast<std::size_t>(o)] = Tap{i0, i1, src - i0};
  }
  return taps;
}

}  // namespace

Tensor resize_bilinear(const Tensor& x, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) {
    throw ShapeError("resize_bilinear: invalid target " +
                     std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  if (out_h == x.h() && out_w == x.w()) return x;
  const auto ty = bilinear_taps(x.h(), out_h);
  const auto tx = bilinear_taps(x.w(), out_w);
  Tensor out(x.n(), x.c(), out_h, out_w);
  for (int b = 0; b < x.n(); ++b) {
    for (int c = 0; c < x.c(); ++c) {
      const double* src = x.data() + x.index(b, c, 0, 0);
      double* dst = out.data() + out.index(b, c, 0, 0);
      for (int oy = 0; oy < out_h; ++oy) {
        const Tap& vy = ty[static_cast<std::size_t>(oy)];
        const double* r0 = src + static_cast<std::size_t>(vy.i0) * x.w();
        const double* r1 = src + static_cast<std::size_t>(vy.i1) * x.w();
        for (int ox = 0; ox < out_w; ++ox) {
          const Tap& vx = tx[static_cast<std::size_t>(ox)];
          const double top = r0[vx.i0] * (1.0 - vx.l1) + r0[vx.i1] * vx.l1;
          const double bot = r1[vx.i0] * (1.0 - vx.l1) + r1[vx.i1] * vx.l1;
          dst[oy * out_w + ox] = top * (1.0 - vy.l1) + bot * vy.l1;
        }
      }
    }
  }
  return out;
}

Tensor resize_bilinear_backward(const Tensor& grad_out, int in_h, int in_w) {
  if (grad_out.h() == in_h && grad_out.w() == in_w) return grad_out;
  const auto ty = bilinear_taps(in_h, grad_out.h());
  const auto tx = bilinear_taps(in_w, grad_out.w());
  Tensor gx(grad_out.n(), grad_out.c(), in_h, in_w);
  for (int b = 0; b < grad_out.n(); ++b) {
    for (int c = 0; c < grad_out.c(); ++c) {
      const double* src = grad_out.data() + grad_out.index(b, c, 0, 0);
      double* dst = gx.data() + gx.index(b, c, 0, 0);
      for (int oy = 0; oy < grad_out.h(); ++oy) {
        const Tap& vy = ty[static_cast<std::size_t>(oy)];
        for (int ox = 0; ox < grad_out.w(); ++ox) {
          const Tap& vx = tx[static_cast<std::size_t>(ox)];
          const double g = src[oy * grad_out.w() + ox];
          const double gt = g * (1.0 - vy.l1);
          const double gb = g * vy.l1;
          dst[vy.i0 * in_w + vx.i0] += gt * (1.0 - vx.l1);
          dst[vy.i0 * in_w + vx.i1] += gt * vx.l1;
          dst[vy.i1 * in_w + vx.i0] += gb * (1.0 - vx.l1);
          dst[vy.i1 * in_w + vx.i1] += gb * vx.l1;
        }
      }
    }
  }
  return gx;
}

Tensor split_tiles(const Tensor& x, int tile) {
  if (tile <= 0 || x.h() % tile != 0 || x.w() % tile != 0 || x.h() != x.w()) {
    throw ShapeError("split_tiles: image " + std::to_string(x.h()) + "x" +
                     std::to_string(x.w()) +
                     " is not a square multiple of tile size " +
                     std::to_string(tile));
  }
  const int s = x.h() / tile;
  Tensor out(x.n() * s * s, x.c(), tile, tile);
  for (int b = 0; b < x.n(); ++b)
    for (int ty = 0; ty < s; ++ty)
      for (int tx = 0; tx < s; ++tx) {
        const int t = (b * s + ty) * s + tx;
        for (int c = 0; c < x.c(); ++c)
          for (int y = 0; y < tile; ++y) {
            const double* src = x.data() + x.index(b, c, ty * tile + y, tx * tile);
            std::copy_n(src, tile, out.data() + out.index(t, c, y, 0));
          }
      }
  return out;
}

Tensor merge_tiles(const Tensor& tiles, int per_side) {
  const int count = per_side * per_side;
  if (per_side <= 0 || tiles.n() % count != 0 || tiles.h() != tiles.w()) {
    throw ShapeError("merge_tiles: " + std::to_string(tiles.n()) +
                     " tiles cannot form " + std::to_string(per_side) + "x" +
                     std::to_string(per_side) + " mosaics");
  }
  const int f = tiles.h();
  const int n = tiles.n() / count;
  Tensor out(n, tiles.c(), f * per_side, f * per_side);
  for (int b = 0; b < n; ++b)
    for (int ty = 0; ty < per_side; ++ty)
      for (int tx = 0; tx < per_side; ++tx) {
        const int t = (b * per_side + ty) * per_side + tx;
        for (int c = 0; c < tiles.c(); ++c)
          for (int y = 0; y < f; ++y) {
            const double* src = tiles.data() + tiles.index(t, c, y, 0);
            std::copy_n(src, f, out.data() + out.index(b, c, ty * f + y, tx * f));
          }
      }
  return out;
}

Tensor max_pool(const Tensor& x, int k, std::vector<std::size_t>* argmax) {
  if (k <= 0 || x.h() % k != 0 || x.w() % k != 0) {
    throw ShapeError("max_pool: " + std::to_string(x.h()) + "x" +
                     std::to_string(x.w()) + " not divisible by window " +
                     std::to_string(k));
  }
  const int oh = x.h() / k, ow = x.w() / k;
  Tensor out(x.n(), x.c(), oh, ow);
  if (argmax) argmax->assign(out.size(), 0);
  std::size_t o = 0;
  for (int b = 0; b < x.n(); ++b)
    for (int c = 0; c < x.c(); ++c)
      for (int y = 0; y < oh; ++y)
        for (int xx = 0; xx < ow; ++xx, ++o) {
          double best = -std::numeric_limits<double>::infinity();
          std::size_t best_i = x.index(b, c, y * k, xx * k);
          for (int dy = 0; dy < k; ++dy)
            for (int dx = 0; dx < k; ++dx) {
              const std::size_t i = x.index(b, c, y * k + dy, xx * k + dx);
              if (x[i] > best) {
                best = x[i];
                best_i = i;
              }
            }
          out[o] = best;
          if (argmax) (*argmax)[o] = best_i;
        }
  return out;
}

Tensor concat_channels(std::span<const Tensor> parts) {
  if (parts.empty()) throw ShapeError("concat_channels: no inputs");
  const Shape4 s0 = parts.front().shape();
  int c = 0;
  for (const auto& p : parts) {
    if (p.n() != s0.n || p.h() != s0.h || p.w() != s0.w) {
      throw ShapeError("concat_channels: " + p.shape().str() + " vs " +
                       s0.str());
    }
    c += p.c();
  }
  Tensor out(s0.n, c, s0.h, s0.w);
  const std::size_t plane = static_cast<std::size_t>(s0.h) * s0.w;
  for (int b = 0; b < s0.n; ++b) {
    int offset = 0;
    for (const auto& p : parts) {
      std::copy_n(p.data() + p.index(b, 0, 0, 0), plane * p.c(),
                  out.data() + out.index(b, offset, 0, 0));
      offset += p.c();
    }
  }
  return out;
}

Tensor upsample_nearest(const Tensor& x, int factor) {
  Tensor out(x.n(), x.c(), x.h() * factor, x.w() * factor);
  for (int b = 0; b < x.n(); ++b)
    for (int c = 0; c < x.c(); ++c)
      for (int y = 0; y < out.h(); ++y)
        for (int xx = 0; xx < out.w(); ++xx)
          out.at(b, c, y, xx) = x.at(b, c, y / factor, xx / factor);
  return out;
}

}  // namespace ssod::kernels
