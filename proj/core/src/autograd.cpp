// Copyright 2026 The ssodlab Authors
// SPDX-License-Identifier: Apache-2.0

#include "ssodlab/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "ssodlab/errors.hpp"
#include "ssodlab/kernels.hpp"

namespace ssod {

// ---------------------------------------------------------------------------
// ParameterSet

Parameter& ParameterSet::add(std::string name, Tensor init) {
  if (index_.contains(name)) {
    throw ConfigError("duplicate parameter name: " + name);
  }
  index_.emplace(name, params_.size());
  params_.push_back(Parameter{std::move(name), std::move(init)});
  return params_.back();
}

const Parameter& ParameterSet::get(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ConfigError("unknown parameter: " + std::string(name));
  }
  return params_[it->second];
}

Parameter& ParameterSet::get(std::string_view name) {
  return const_cast<Parameter&>(std::as_const(*this).get(name));
}

bool ParameterSet::contains(std::string_view name) const {
  return index_.find(name) != index_.end();
}

std::size_t ParameterSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

bool ParameterSet::same_structure(const ParameterSet& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (params_[i].name != other.params_[i].name ||
        !(params_[i].value.shape() == other.params_[i].value.shape())) {
      return false;
    }
  }
  return true;
}

bool ParameterSet::operator==(const ParameterSet& other) const {
  if (!same_structure(other)) return false;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    if (!(params_[i].value == other.params_[i].value)) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Graph

Var Graph::input(Tensor value, bool requires_grad) {
  Node n;
  n.owned = std::move(value);
  n.requires_grad = tracking_ && requires_grad;
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

Var Graph::param(const Parameter& p) {
  Node n;
  n.borrowed = &p.value;
  n.requires_grad = tracking_;
  nodes_.push_back(std::move(n));
  const int id = static_cast<int>(nodes_.size()) - 1;
  if (tracking_) param_nodes_.emplace_back(&p, id);
  return Var{id};
}

const Tensor& Graph::value(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  return n.borrowed ? *n.borrowed : n.owned;
}

Tensor& Graph::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) {
    const Tensor& v = n.borrowed ? *n.borrowed : n.owned;
    n.grad = Tensor(v.shape());
  }
  return n.grad;
}

void Graph::accumulate_grad(Var v, const Tensor& g) {
  if (!nodes_.at(static_cast<std::size_t>(v.id)).requires_grad) return;
  grad_buffer(v.id).add_(g);
}

const Tensor* Graph::grad(Var v) const {
  const Node& n = nodes_.at(static_cast<std::size_t>(v.id));
  return n.grad.empty() ? nullptr : &n.grad;
}

Var Graph::push(Tensor value, std::span<const Var> parents, BackwardFn fn) {
  Node n;
  n.owned = std::move(value);
  if (tracking_) {
    n.requires_grad = std::any_of(parents.begin(), parents.end(), [&](Var p) {
      return nodes_[static_cast<std::size_t>(p.id)].requires_grad;
    });
    if (n.requires_grad) n.backward = std::move(fn);
  }
  nodes_.push_back(std::move(n));
  return Var{static_cast<int>(nodes_.size()) - 1};
}

void Graph::backward() {
  if (!tracking_) throw StateError("backward() on a graph without tracking");
  for (int id = static_cast<int>(nodes_.size()) - 1; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backward && !n.grad.empty()) n.backward(*this, id);
  }
}

std::vector<std::pair<const Parameter*, const Tensor*>> Graph::param_grads()
    const {
  std::vector<std::pair<const Parameter*, const Tensor*>> out;
  for (const auto& [p, id] : param_nodes_) {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.grad.empty()) out.emplace_back(p, &n.grad);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Ops

namespace ops {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using CMapMat = Eigen::Map<const RowMat>;

int out_extent(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// cols is (cin*k*k) x (n*oh*ow), column index = (b*oh + oy)*ow + ox.
void im2col(const Tensor& x, int k, int stride, int pad, int oh, int ow,
            RowMat& cols) {
  const int n = x.n(), cin = x.c(), h = x.h(), w = x.w();
  const int per = oh * ow;
  cols.resize(static_cast<Eigen::Index>(cin) * k * k,
              static_cast<Eigen::Index>(n) * per);
  for (int ci = 0; ci < cin; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(ci) * k + ky) * k + kx;
        double* dst = cols.row(row).data();
        for (int b = 0; b < n; ++b) {
          const double* src = x.data() + x.index(b, ci, 0, 0);
          double* d = dst + static_cast<std::size_t>(b) * per;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) {
              std::fill(d + oy * ow, d + (oy + 1) * ow, 0.0);
              continue;
            }
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kx;
              d[oy * ow + ox] = (ix >= 0 && ix < w) ? src[iy * w + ix] : 0.0;
            }
          }
        }
      }
    }
  }
}

void col2im(const RowMat& cols, int k, int stride, int pad, int oh, int ow,
            Tensor& dx) {
  const int n = dx.n(), cin = dx.c(), h = dx.h(), w = dx.w();
  const int per = oh * ow;
  for (int ci = 0; ci < cin; ++ci) {
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const Eigen::Index row = (static_cast<Eigen::Index>(ci) * k + ky) * k + kx;
        const double* srcrow = cols.row(row).data();
        for (int b = 0; b < n; ++b) {
          double* dst = dx.data() + dx.index(b, ci, 0, 0);
          const double* s = srcrow + static_cast<std::size_t>(b) * per;
          for (int oy = 0; oy < oh; ++oy) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= h) continue;
            for (int ox = 0; ox < ow; ++ox) {
              const int ix = ox * stride - pad + kx;
              if (ix >= 0 && ix < w) dst[iy * w + ix] += s[oy * ow + ox];
            }
          }
        }
      }
    }
  }
}

}  // namespace

Var conv2d(Graph& g, Var x, Var weight, Var bias, int stride, int pad) {
  const Tensor& xv = g.value(x);
  const Tensor& wv = g.value(weight);
  const Tensor& bv = g.value(bias);
  const int cout = wv.n(), cin = wv.c(), k = wv.h();
  if (xv.c() != cin || wv.w() != k) {
    throw ShapeError("conv2d: input " + xv.shape().str() + " vs weight " +
                     wv.shape().str());
  }
  if (bv.size() != static_cast<std::size_t>(cout)) {
    throw ShapeError("conv2d: bias size mismatch");
  }
  const int oh = out_extent(xv.h(), k, stride, pad);
  const int ow = out_extent(xv.w(), k, stride, pad);
  const int n = xv.n();
  const int per = oh * ow;

  auto cols = std::make_shared<RowMat>();
  im2col(xv, k, stride, pad, oh, ow, *cols);
  CMapMat wm(wv.data(), cout, static_cast<Eigen::Index>(cin) * k * k);
  RowMat ym = wm * *cols;

  Tensor out(n, cout, oh, ow);
  for (int b = 0; b < n; ++b) {
    for (int co = 0; co < cout; ++co) {
      const double* src = ym.row(co).data() + static_cast<std::size_t>(b) * per;
      double* dst = out.data() + out.index(b, co, 0, 0);
      const double bias_v = bv[static_cast<std::size_t>(co)];
      for (int i = 0; i < per; ++i) dst[i] = src[i] + bias_v;
    }
  }
  if (!g.tracking()) cols.reset();

  const Var parents[] = {x, weight, bias};
  return g.push(std::move(out), parents,
                [x, weight, bias, cols, stride, pad, k, cout, cin, n, oh, ow,
                 per](Graph& gr, int self) {
                  const Tensor& gy = *gr.grad(Var{self});
                  RowMat dy(cout, static_cast<Eigen::Index>(n) * per);
                  for (int b = 0; b < n; ++b) {
                    for (int co = 0; co < cout; ++co) {
                      const double* src = gy.data() + gy.index(b, co, 0, 0);
                      std::copy_n(src, per,
                                  dy.row(co).data() + static_cast<std::size_t>(b) * per);
                    }
                  }
                  if (gr.requires_grad(weight)) {
                    Tensor& gw = gr.grad_buffer(weight.id);
                    MapMat gwm(gw.data(), cout, static_cast<Eigen::Index>(cin) * k * k);
                    gwm.noalias() += dy * cols->transpose();
                  }
                  if (gr.requires_grad(bias)) {
                    Tensor& gb = gr.grad_buffer(bias.id);
                    for (int co = 0; co < cout; ++co) {
                      gb[static_cast<std::size_t>(co)] += dy.row(co).sum();
                    }
                  }
                  if (gr.requires_grad(x)) {
                    const Tensor& wv2 = gr.value(weight);
                    CMapMat wm2(wv2.data(), cout, static_cast<Eigen::Index>(cin) * k * k);
                    RowMat dcols = wm2.transpose() * dy;
                    col2im(dcols, k, stride, pad, oh, ow, gr.grad_buffer(x.id));
                  }
                });
}

Var leaky_relu(Graph& g, Var x, double slope) {
  const Tensor& xv = g.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) {
    out[i] = xv[i] > 0.0 ? xv[i] : slope * xv[i];
  }
  const Var parents[] = {x};
  return g.push(std::move(out), parents, [x, slope](Graph& gr, int self) {
    const Tensor& gy = *gr.grad(Var{self});
    const Tensor& xv2 = gr.value(x);
    Tensor& gx = gr.grad_buffer(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) {
      gx[i] += xv2[i] > 0.0 ? gy[i] : slope * gy[i];
    }
  });
}

Var add(Graph& g, Var a, Var b) {
  Tensor out = g.value(a);
  out.add_(g.value(b));
  const Var parents[] = {a, b};
  return g.push(std::move(out), parents, [a, b](Graph& gr, int self) {
    const Tensor gy = *gr.grad(Var{self});
    if (gr.requires_grad(a)) gr.grad_buffer(a.id).add_(gy);
    if (gr.requires_grad(b)) gr.grad_buffer(b.id).add_(gy);
  });
}

Var upsample_nearest(Graph& g, Var x, int factor) {
  Tensor out = kernels::upsample_nearest(g.value(x), factor);
  const Var parents[] = {x};
  return g.push(std::move(out), parents, [x, factor](Graph& gr, int self) {
    const Tensor& gy = *gr.grad(Var{self});
    Tensor& gx = gr.grad_buffer(x.id);
    for (int b = 0; b < gy.n(); ++b)
      for (int c = 0; c < gy.c(); ++c)
        for (int y = 0; y < gy.h(); ++y)
          for (int xx = 0; xx < gy.w(); ++xx)
            gx.at(b, c, y / factor, xx / factor) += gy.at(b, c, y, xx);
  });
}

Var max_pool(Graph& g, Var x, int k) {
  auto argmax = std::make_shared<std::vector<std::size_t>>();
  Tensor out = kernels::max_pool(g.value(x), k, argmax.get());
  const Var parents[] = {x};
  return g.push(std::move(out), parents, [x, argmax](Graph& gr, int self) {
    const Tensor& gy = *gr.grad(Var{self});
    Tensor& gx = gr.grad_buffer(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[(*argmax)[i]] += gy[i];
  });
}

Var concat_channels(Graph& g, std::span<const Var> parts) {
  std::vector<Tensor> values;
  values.reserve(parts.size());
  for (Var p : parts) values.push_back(g.value(p));
  Tensor out = kernels::concat_channels(values);
  std::vector<Var> ps(parts.begin(), parts.end());
  return g.push(std::move(out), parts, [ps](Graph& gr, int self) {
    const Tensor& gy = *gr.grad(Var{self});
    int offset = 0;
    for (Var p : ps) {
      const int c = gr.value(p).c();
      if (gr.requires_grad(p)) {
        Tensor& gp = gr.grad_buffer(p.id);
        for (int b = 0; b < gy.n(); ++b)
          for (int ci = 0; ci < c; ++ci) {
            const double* src = gy.data() + gy.index(b, offset + ci, 0, 0);
            double* dst = gp.data() + gp.index(b, ci, 0, 0);
            for (int i = 0; i < gy.h() * gy.w(); ++i) dst[i] += src[i];
          }
      }
      offset += c;
    }
  });
}

Var resize_bilinear(Graph& g, Var x, int out_h, int out_w) {
  const Tensor& xv = g.value(x);
  const int in_h = xv.h(), in_w = xv.w();
  Tensor out = kernels::resize_bilinear(xv, out_h, out_w);
  const Var parents[] = {x};
  return g.push(std::move(out), parents, [x, in_h, in_w](Graph& gr, int self) {
    gr.grad_buffer(x.id).add_(
        kernels::resize_bilinear_backward(*gr.grad(Var{self}), in_h, in_w));
  });
}

Var split_tiles(Graph& g, Var x, int tile) {
  const int s = g.value(x).h() / tile;
  Tensor out = kernels::split_tiles(g.value(x), tile);
  const Var parents[] = {x};
  return g.push(std::move(out), parents, [x, s](Graph& gr, int self) {
    gr.grad_buffer(x.id).add_(kernels::merge_tiles(*gr.grad(Var{self}), s));
  });
}

Var merge_tiles(Graph& g, Var x, int s) {
  const int tile = g.value(x).h();
  Tensor out = kernels::merge_tiles(g.value(x), s);
  const Var parents[] = {x};
  return g.push(std::move(out), parents, [x, tile](Graph& gr, int self) {
    gr.grad_buffer(x.id).add_(kernels::split_tiles(*gr.grad(Var{self}), tile));
  });
}

Var gradient_reversal(Graph& g, Var x, double scale) {
  Tensor out = g.value(x);
  const Var parents[] = {x};
  return g.push(std::move(out), parents, [x, scale](Graph& gr, int self) {
    const Tensor& gy = *gr.grad(Var{self});
    Tensor& gx = gr.grad_buffer(x.id);
    for (std::size_t i = 0; i < gy.size(); ++i) gx[i] -= scale * gy[i];
  });
}

}  // namespace ops
}  // namespace ssod
