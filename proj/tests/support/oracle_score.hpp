// SPDX-License-Identifier: Apache-2.0
//
// Straight-line float64 re-implementation of the conditional score D(x, t)
// used as an independent oracle. It reads the same parameter values as the
// production path but performs every computation with its own plain loops:
// embedding lookup, bidirectional GRU, attention, layer weights, the
// strided conv pyramid with global pooling, the per-scale generated affine
// functionals, the beta mixture and the attention-weighted geometric mean.
#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "tagan/model.hpp"

namespace tagan::test {

namespace oracle_detail {

inline double sig(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

inline std::vector<double> affine(const std::vector<double>& w,
                                  const std::vector<double>& b,
                                  const std::vector<double>& x, int rows,
                                  int cols) {
  std::vector<double> y(static_cast<std::size_t>(rows), 0.0);
  for (int r = 0; r < rows; ++r) {
    double acc = b.empty() ? 0.0 : b[static_cast<std::size_t>(r)];
    for (int c = 0; c < cols; ++c) {
      acc += w[static_cast<std::size_t>(r) * cols + c] * x[static_cast<std::size_t>(c)];
    }
    y[static_cast<std::size_t>(r)] = acc;
  }
  return y;
}

struct GruWeights {
  std::vector<double> w_r, u_r, b_r, w_z, u_z, b_z, w_n, u_n, b_n;
  int d = 0;
};

inline GruWeights fetch_gru(ParamStore<double>& store, const std::string& prefix) {
  GruWeights g;
  g.w_r = store.at(prefix + "/w_r").value.data;
  g.u_r = store.at(prefix + "/u_r").value.data;
  g.b_r = store.at(prefix + "/b_r").value.data;
  g.w_z = store.at(prefix + "/w_z").value.data;
  g.u_z = store.at(prefix + "/u_z").value.data;
  g.b_z = store.at(prefix + "/b_z").value.data;
  g.w_n = store.at(prefix + "/w_n").value.data;
  g.u_n = store.at(prefix + "/u_n").value.data;
  g.b_n = store.at(prefix + "/b_n").value.data;
  g.d = static_cast<int>(g.b_r.size());
  return g;
}

inline std::vector<double> gru_step(const GruWeights& g,
                                    const std::vector<double>& x,
                                    const std::vector<double>& h) {
  const int d = g.d;
  std::vector<double> r(d), z(d), n(d), out(d);
  auto wr = affine(g.w_r, g.b_r, x, d, d);
  auto ur = affine(g.u_r, {}, h, d, d);
  auto wz = affine(g.w_z, g.b_z, x, d, d);
  auto uz = affine(g.u_z, {}, h, d, d);
  for (int i = 0; i < d; ++i) {
    r[i] = sig(wr[i] + ur[i]);
    z[i] = sig(wz[i] + uz[i]);
  }
  std::vector<double> rh(d);
  for (int i = 0; i < d; ++i) rh[i] = r[i] * h[static_cast<std::size_t>(i)];
  auto wn = affine(g.w_n, g.b_n, x, d, d);
  auto un = affine(g.u_n, {}, rh, d, d);
  for (int i = 0; i < d; ++i) {
    n[i] = std::tanh(wn[i] + un[i]);
    out[i] = (1.0 - z[i]) * n[i] + z[i] * h[static_cast<std::size_t>(i)];
  }
  return out;
}

/// Plain cross-correlation + channel bias + leaky rectifier.
inline std::vector<double> conv_lrelu(const std::vector<double>& x, int c_in,
                                      int side, const std::vector<double>& k,
                                      const std::vector<double>& bias, int c_out,
                                      int ksize, int stride, int pad,
                                      double slope, int& out_side) {
  out_side = (side + 2 * pad - ksize) / stride + 1;
  std::vector<double> y(static_cast<std::size_t>(c_out) * out_side * out_side, 0.0);
  for (int co = 0; co < c_out; ++co) {
    for (int oy = 0; oy < out_side; ++oy) {
      for (int ox = 0; ox < out_side; ++ox) {
        double acc = bias[static_cast<std::size_t>(co)];
        for (int ci = 0; ci < c_in; ++ci) {
          for (int ky = 0; ky < ksize; ++ky) {
            const int iy = oy * stride - pad + ky;
            if (iy < 0 || iy >= side) continue;
            for (int kx = 0; kx < ksize; ++kx) {
              const int ix = ox * stride - pad + kx;
              if (ix < 0 || ix >= side) continue;
              acc += k[((static_cast<std::size_t>(co) * c_in + ci) * ksize + ky) *
                           ksize +
                       kx] *
                     x[(static_cast<std::size_t>(ci) * side + iy) * side + ix];
            }
          }
        }
        y[(static_cast<std::size_t>(co) * out_side + oy) * out_side + ox] =
            acc > 0 ? acc : slope * acc;
      }
    }
  }
  return y;
}

}  // namespace oracle_detail

/// D(x, t) recomputed start to finish with independent float64 loops.
inline double oracle_conditional_score(TaganModel<double>& model,
                                       const TensorData<double>& image,
                                       const std::vector<int>& ids) {
  using namespace oracle_detail;
  auto& store = model.store;
  const auto& cfg = model.cfg;
  const int d_w = cfg.d_word;
  const int t_len = static_cast<int>(ids.size());
  const int j_len = static_cast<int>(cfg.disc_scales.size());

  // Word features: summed bidirectional GRU states over learned embeddings.
  const auto& emb = store.at("disc/text/emb").value.data;
  auto embed = [&](int id) {
    return std::vector<double>(emb.begin() + static_cast<std::size_t>(id) * d_w,
                               emb.begin() + static_cast<std::size_t>(id + 1) * d_w);
  };
  const GruWeights fwd = fetch_gru(store, "disc/text/gru_f");
  const GruWeights bwd = fetch_gru(store, "disc/text/gru_b");

  std::vector<std::vector<double>> w(static_cast<std::size_t>(t_len));
  std::vector<double> h(static_cast<std::size_t>(d_w), 0.0);
  for (int i = 0; i < t_len; ++i) {
    h = gru_step(fwd, embed(ids[static_cast<std::size_t>(i)]), h);
    w[static_cast<std::size_t>(i)] = h;
  }
  h.assign(static_cast<std::size_t>(d_w), 0.0);
  for (int i = t_len - 1; i >= 0; --i) {
    h = gru_step(bwd, embed(ids[static_cast<std::size_t>(i)]), h);
    for (int c = 0; c < d_w; ++c) {
      w[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)] +=
          h[static_cast<std::size_t>(c)];
    }
  }

  std::vector<double> u(static_cast<std::size_t>(d_w), 0.0);
  for (const auto& wi : w) {
    for (int c = 0; c < d_w; ++c) u[static_cast<std::size_t>(c)] += wi[static_cast<std::size_t>(c)];
  }
  for (auto& v : u) v /= static_cast<double>(t_len);

  // Attention over u . w_i.
  std::vector<double> logits(static_cast<std::size_t>(t_len), 0.0);
  for (int i = 0; i < t_len; ++i) {
    double acc = 0;
    for (int c = 0; c < d_w; ++c) {
      acc += u[static_cast<std::size_t>(c)] * w[static_cast<std::size_t>(i)][static_cast<std::size_t>(c)];
    }
    logits[static_cast<std::size_t>(i)] = acc;
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double denom = 0;
  std::vector<double> alpha(static_cast<std::size_t>(t_len));
  for (int i = 0; i < t_len; ++i) {
    alpha[static_cast<std::size_t>(i)] = std::exp(logits[static_cast<std::size_t>(i)] - mx);
    denom += alpha[static_cast<std::size_t>(i)];
  }
  for (auto& a : alpha) a /= denom;

  // Layer weights: softmax over P w_i.
  const auto& proj = store.at("disc/text/layer_proj").value.data;
  std::vector<std::vector<double>> beta(static_cast<std::size_t>(t_len));
  for (int i = 0; i < t_len; ++i) {
    auto row = affine(proj, {}, w[static_cast<std::size_t>(i)], j_len, d_w);
    const double rmx = *std::max_element(row.begin(), row.end());
    double rsum = 0;
    for (auto& v : row) {
      v = std::exp(v - rmx);
      rsum += v;
    }
    for (auto& v : row) v /= rsum;
    beta[static_cast<std::size_t>(i)] = std::move(row);
  }

  // Pyramid with pooled vectors.
  const auto& pyr_cfg = model.discriminator.cfg.pyramid;
  std::vector<double> x(image.data.begin(), image.data.end());
  int side = pyr_cfg.image;
  int c_in = pyr_cfg.in_channels;
  std::vector<std::vector<double>> pooled;
  for (int stage = 0; stage < pyr_cfg.stages(); ++stage) {
    const auto& k = store.at("disc/pyr/c" + std::to_string(stage) + "/k").value.data;
    const auto& b = store.at("disc/pyr/c" + std::to_string(stage) + "/b").value.data;
    const int c_out = pyr_cfg.channels[static_cast<std::size_t>(stage)];
    int out_side = 0;
    x = conv_lrelu(x, c_in, side, k, b, c_out, pyr_cfg.kernel, 2,
                   (pyr_cfg.kernel - 1) / 2, pyr_cfg.lrelu_slope, out_side);
    std::vector<double> v(static_cast<std::size_t>(c_out), 0.0);
    for (int c = 0; c < c_out; ++c) {
      double acc = 0;
      for (int p = 0; p < out_side * out_side; ++p) {
        acc += x[static_cast<std::size_t>(c) * out_side * out_side + p];
      }
      v[static_cast<std::size_t>(c)] = acc / static_cast<double>(out_side * out_side);
    }
    pooled.push_back(std::move(v));
    side = out_side;
    c_in = c_out;
  }

  // Local discriminators, mixture and geometric mean in log space.
  const double eps = model.discriminator.cfg.clamp_eps;
  double log_d = 0.0;
  for (int i = 0; i < t_len; ++i) {
    double mixed = 0.0;
    for (int j = 0; j < j_len; ++j) {
      const int stage = cfg.disc_scales[static_cast<std::size_t>(j)];
      const int c_j = pyr_cfg.channels[static_cast<std::size_t>(stage)];
      const auto& gw = store.at("disc/bank/s" + std::to_string(j) + "/w").value.data;
      const auto& gb = store.at("disc/bank/s" + std::to_string(j) + "/b").value.data;
      auto gen = affine(gw, gb, w[static_cast<std::size_t>(i)], c_j + 1, d_w);
      double logit = gen[static_cast<std::size_t>(c_j)];
      for (int c = 0; c < c_j; ++c) {
        logit += gen[static_cast<std::size_t>(c)] *
                 pooled[static_cast<std::size_t>(stage)][static_cast<std::size_t>(c)];
      }
      mixed += beta[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] * sig(logit);
    }
    mixed = std::clamp(mixed, eps, 1.0 - eps);
    log_d += alpha[static_cast<std::size_t>(i)] * std::log(mixed);
  }
  return std::exp(log_d);
}

}  // namespace tagan::test
