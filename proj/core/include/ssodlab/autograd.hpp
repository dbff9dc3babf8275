// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssodlab/tensor.hpp"

namespace ssod {

struct Parameter {
  std::string name;
  Tensor value;
};

/// Ordered collection of named parameter arrays. Iteration order is
/// insertion order, which makes checkpoints and EMA updates deterministic.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor init);
  const Parameter& get(std::string_view name) const;
  Parameter& get(std::string_view name);
  bool contains(std::string_view name) const;

  std::vector<Parameter>& items() { return params_; }
  const std::vector<Parameter>& items() const { return params_; }
  std::size_t num_arrays() const { return params_.size(); }
  std::size_t num_scalars() const;

  /// Same names, same order, same shapes.
  bool same_structure(const ParameterSet& other) const;
  bool operator==(const ParameterSet& other) const;

 private:
  std::vector<Parameter> params_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

struct Var {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape. Nodes are appended in topological order by
/// construction; backward() walks them in reverse. A graph built with
/// tracking disabled records values only.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, int self)>;

  explicit Graph(bool track_gradients = true) : tracking_(track_gradients) {}
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  bool tracking() const { return tracking_; }

  Var input(Tensor value, bool requires_grad = false);
  /// Borrow a parameter; its value must outlive the graph.
  Var param(const Parameter& p);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Adds `g` into dL/dv.
  void accumulate_grad(Var v, const Tensor& g);
  /// Gradient buffer for node id, allocated as zeros on first access.
  Tensor& grad_buffer(int id);
  /// Gradient of v, or nullptr if nothing flowed into it.
  const Tensor* grad(Var v) const;

  void backward();

  /// (parameter, gradient) pairs for every borrowed parameter that received a
  /// gradient in backward().
  std::vector<std::pair<const Parameter*, const Tensor*>> param_grads() const;

  /// Appends an op result. `fn` is stored only if tracking and any parent
  /// requires a gradient.
  Var push(Tensor value, std::span<const Var> parents, BackwardFn fn);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor owned;
    const Tensor* borrowed = nullptr;
    Tensor grad;
    bool requires_grad = false;
    BackwardFn backward;
  };
  bool tracking_;
  std::vector<Node> nodes_;
  std::vector<std::pair<const Parameter*, int>> param_nodes_;
};

namespace ops {

/// 2-D convolution; weight is (cout, cin, k, k), bias is (1, cout, 1, 1).
Var conv2d(Graph& g, Var x, Var weight, Var bias, int stride, int pad);
Var leaky_relu(Graph& g, Var x, double slope);
Var add(Graph& g, Var a, Var b);
Var upsample_nearest(Graph& g, Var x, int factor);
/// Non-overlapping max pooling, window == stride == k.
Var max_pool(Graph& g, Var x, int k);
Var concat_channels(Graph& g, std::span<const Var> parts);
Var resize_bilinear(Graph& g, Var x, int out_h, int out_w);
/// (N, C, s*T, s*T) -> (N*s*s, C, T, T), tiles row-major per image.
Var split_tiles(Graph& g, Var x, int tile);
/// Inverse of split_tiles for a tiles-per-side factor s.
Var merge_tiles(Graph& g, Var x, int s);
/// Identity forward; multiplies the incoming gradient by -scale.
Var gradient_reversal(Graph& g, Var x, double scale = 1.0);

}  // namespace ops

}  // namespace ssod
