// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "tagan/autodiff.hpp"
#include "tagan/param_store.hpp"
#include "tagan/rng.hpp"

namespace tagan::nn {

/// Binds stored parameters into a graph, either trainable or frozen.
/// Frozen bindings become constants: no gradient buffers, no harvest.
template <typename S>
struct Binder {
  ad::Graph<S>* graph;
  bool frozen = false;

  ad::Tensor<S> operator()(Parameter<S>& p) const {
    return frozen ? graph->frozen(p) : graph->param(p);
  }
};

// ---------------------------------------------------------------------------
// Affine layer: y = W x + b
// ---------------------------------------------------------------------------

template <typename S>
struct LinearParams {
  Parameter<S>* weight = nullptr;  // [out, in]
  Parameter<S>* bias = nullptr;    // [out]

  static LinearParams create(ParamStore<S>& store, const std::string& prefix,
                             int in, int out, Rng& rng, double stddev = 0.02) {
    LinearParams p;
    p.weight = &store.create(prefix + "/w", {out, in});
    p.bias = &store.create(prefix + "/b", {out});
    init_normal(*p.weight, rng, stddev);
    return p;
  }
};

template <typename S>
struct BoundLinear {
  ad::Tensor<S> weight, bias;

  ad::Tensor<S> operator()(ad::Tensor<S> x) const {
    return ad::add(ad::matvec(weight, x), bias);
  }
};

template <typename S>
BoundLinear<S> bind(const LinearParams<S>& p, const Binder<S>& b) {
  return {b(*p.weight), b(*p.bias)};
}

// ---------------------------------------------------------------------------
// Convolution layer: conv + channel bias
// ---------------------------------------------------------------------------

template <typename S>
struct ConvParams {
  Parameter<S>* kernels = nullptr;  // [out, in, k, k]
  Parameter<S>* bias = nullptr;     // [out]
  int stride = 1;
  int pad = 0;

  static ConvParams create(ParamStore<S>& store, const std::string& prefix,
                           int in, int out, int k, int stride, int pad,
                           Rng& rng, double stddev = 0.02) {
    ConvParams p;
    p.kernels = &store.create(prefix + "/k", {out, in, k, k});
    p.bias = &store.create(prefix + "/b", {out});
    p.stride = stride;
    p.pad = pad;
    init_normal(*p.kernels, rng, stddev);
    return p;
  }
};

template <typename S>
struct BoundConv {
  ad::Tensor<S> kernels, bias;
  int stride = 1;
  int pad = 0;

  ad::Tensor<S> operator()(ad::Tensor<S> x) const {
    return ad::add_channel_bias(ad::conv2d(x, kernels, stride, pad), bias);
  }
};

template <typename S>
BoundConv<S> bind(const ConvParams<S>& p, const Binder<S>& b) {
  return {b(*p.kernels), b(*p.bias), p.stride, p.pad};
}

// ---------------------------------------------------------------------------
// GRU cell
// ---------------------------------------------------------------------------

template <typename S>
struct GruParams {
  // Gate order: reset (r), update (z), candidate (n).
  Parameter<S>*w_r, *u_r, *b_r, *w_z, *u_z, *b_z, *w_n, *u_n, *b_n;

  static GruParams create(ParamStore<S>& store, const std::string& prefix,
                          int d_in, int d_h, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(d_h));
    GruParams p;
    auto mk = [&](const char* name, Shape shape) {
      Parameter<S>* q = &store.create(prefix + "/" + name, std::move(shape));
      init_uniform(*q, rng, bound);
      return q;
    };
    p.w_r = mk("w_r", {d_h, d_in});
    p.u_r = mk("u_r", {d_h, d_h});
    p.b_r = &store.create(prefix + "/b_r", {d_h});
    p.w_z = mk("w_z", {d_h, d_in});
    p.u_z = mk("u_z", {d_h, d_h});
    p.b_z = &store.create(prefix + "/b_z", {d_h});
    p.w_n = mk("w_n", {d_h, d_in});
    p.u_n = mk("u_n", {d_h, d_h});
    p.b_n = &store.create(prefix + "/b_n", {d_h});
    return p;
  }
};

template <typename S>
struct BoundGru {
  ad::Tensor<S> w_r, u_r, b_r, w_z, u_z, b_z, w_n, u_n, b_n;
  int d_h = 0;
};

template <typename S>
BoundGru<S> bind(const GruParams<S>& p, const Binder<S>& b) {
  return {b(*p.w_r), b(*p.u_r), b(*p.b_r), b(*p.w_z), b(*p.u_z), b(*p.b_z),
          b(*p.w_n), b(*p.u_n), b(*p.b_n), p.w_r->value.shape[0]};
}

/// One GRU update:
///   r = sigmoid(W_r x + U_r h + b_r)
///   z = sigmoid(W_z x + U_z h + b_z)
///   n = tanh(W_n x + U_n (r .* h) + b_n)
///   h' = (1 - z) .* n + z .* h
/// z saturating to 1 carries the previous state through unchanged.
template <typename S>
ad::Tensor<S> gru_cell(ad::Tensor<S> x, ad::Tensor<S> h_prev,
                       const BoundGru<S>& g) {
  using namespace ad;
  auto r = sigmoid(add(add(matvec(g.w_r, x), matvec(g.u_r, h_prev)), g.b_r));
  auto z = sigmoid(add(add(matvec(g.w_z, x), matvec(g.u_z, h_prev)), g.b_z));
  auto n = tanh(add(add(matvec(g.w_n, x), matvec(g.u_n, mul(r, h_prev))), g.b_n));
  auto keep = mul(z, h_prev);
  auto fresh = mul(add_scalar(neg(z), 1.0), n);
  return add(fresh, keep);
}

}  // namespace tagan::nn
