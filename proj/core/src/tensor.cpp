// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "ssodlab/errors.hpp"

namespace ssod {

std::string Shape4::str() const {
  return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
         std::to_string(h) + "," + std::to_string(w) + ")";
}

Tensor::Tensor(Shape4 shape, double fill)
    : shape_(shape), data_(shape.numel(), fill) {
  if (shape.n < 0 || shape.c < 0 || shape.h < 0 || shape.w < 0) {
    throw ShapeError("negative tensor dimension " + shape.str());
  }
}

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

void Tensor::add_(const Tensor& other) {
  if (!(shape_ == other.shape_)) {
    throw ShapeError("add_: shape " + shape_.str() + " vs " +
                     other.shape_.str());
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
}

void Tensor::scale_(double s) {
  for (double& v : data_) v *= s;
}

Tensor Tensor::slice_batch(int begin, int count) const {
  if (begin < 0 || count < 0 || begin + count > shape_.n) {
    throw ShapeError("slice_batch out of range for " + shape_.str());
  }
  Tensor out(count, shape_.c, shape_.h, shape_.w);
  const std::size_t item = static_cast<std::size_t>(shape_.c) * shape_.h *
                           shape_.w;
  std::copy_n(data_.begin() + static_cast<std::ptrdiff_t>(begin * item),
              count * item, out.data_.begin());
  return out;
}

Tensor Tensor::stack_batch(std::span<const Tensor> parts) {
  if (parts.empty()) return {};
  Shape4 s = parts.front().shape();
  int n = 0;
  for (const auto& p : parts) {
    if (p.c() != s.c || p.h() != s.h || p.w() != s.w) {
      throw ShapeError("stack_batch: mismatched item shape " +
                       p.shape().str());
    }
    n += p.n();
  }
  Tensor out(n, s.c, s.h, s.w);
  auto it = out.data_.begin();
  for (const auto& p : parts) it = std::copy(p.data_.begin(), p.data_.end(), it);
  return out;
}

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError("max_abs_diff: shape mismatch");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::abs(a[i] - b[i]));
  }
  return m;
}

}  // namespace ssod
