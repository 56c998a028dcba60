// SPDX-License-Identifier: Apache-2.0
#include "tagan/generator.hpp"

namespace tagan {

void GeneratorConfig::validate() const {
  if (text.d_cond < 1) throw ContractError("generator needs d_cond >= 1");
  if (widths.size() != 2) throw ContractError("generator expects two encoder widths");
  if (image % 4 != 0) {
    throw DimensionError("generator image size must be divisible by 4, got " +
                         std::to_string(image));
  }
  if (res_blocks < 0) throw ContractError("res_blocks must be >= 0");
}

template <typename S>
GeneratorParams<S> GeneratorParams<S>::create(ParamStore<S>& store,
                                              const std::string& prefix,
                                              const GeneratorConfig& cfg,
                                              Rng& rng) {
  cfg.validate();
  GeneratorParams p;
  p.cfg = cfg;
  p.text = TextEncoderParams<S>::create(store, prefix + "/text", cfg.text, rng);
  const int w1 = cfg.widths[0], w2 = cfg.widths[1];
  p.enc1 = nn::ConvParams<S>::create(store, prefix + "/enc1", cfg.in_channels,
                                     w1, 3, 2, 1, rng);
  p.enc2 = nn::ConvParams<S>::create(store, prefix + "/enc2", w1, w2, 3, 2, 1, rng);
  p.merge = nn::ConvParams<S>::create(store, prefix + "/merge",
                                      w2 + cfg.text.d_cond, w2, 3, 1, 1, rng);
  for (int b = 0; b < cfg.res_blocks; ++b) {
    const std::string base = prefix + "/res" + std::to_string(b);
    p.res.push_back(nn::ConvParams<S>::create(store, base + "/c1", w2, w2, 3, 1, 1, rng));
    p.res.push_back(nn::ConvParams<S>::create(store, base + "/c2", w2, w2, 3, 1, 1, rng));
  }
  p.dec1 = nn::ConvParams<S>::create(store, prefix + "/dec1", w2, w1, 3, 1, 1, rng);
  p.skip = nn::ConvParams<S>::create(store, prefix + "/skip", w1, w1, 1, 1, 0, rng);
  p.dec2 = nn::ConvParams<S>::create(store, prefix + "/dec2", w1, w1, 3, 1, 1, rng);
  p.out = nn::ConvParams<S>::create(store, prefix + "/out", w1, cfg.in_channels,
                                    3, 1, 1, rng);
  return p;
}

template <typename S>
BoundGenerator<S> GeneratorParams<S>::bind(ad::Graph<S>& graph, bool frozen) const {
  return BoundGenerator<S>(this, &graph, nn::Binder<S>{&graph, frozen});
}

template <typename S>
BoundGenerator<S>::BoundGenerator(const GeneratorParams<S>* params,
                                  ad::Graph<S>* graph,
                                  const nn::Binder<S>& binder)
    : params_(params),
      graph_(graph),
      text_(params->text.bind(*graph, binder.frozen)),
      enc1_(nn::bind(params->enc1, binder)),
      enc2_(nn::bind(params->enc2, binder)),
      merge_(nn::bind(params->merge, binder)),
      dec1_(nn::bind(params->dec1, binder)),
      skip_(nn::bind(params->skip, binder)),
      dec2_(nn::bind(params->dec2, binder)),
      out_(nn::bind(params->out, binder)) {
  for (const auto& r : params->res) res_.push_back(nn::bind(r, binder));
}

template <typename S>
ad::Tensor<S> BoundGenerator<S>::generate_from(ad::Tensor<S> image,
                                               ad::Tensor<S> cond) const {
  using namespace ad;
  const auto& cfg = params_->cfg;
  if (image.shape() != Shape{cfg.in_channels, cfg.image, cfg.image}) {
    throw DimensionError("generator expects a " + std::to_string(cfg.in_channels) +
                         "x" + std::to_string(cfg.image) + "x" +
                         std::to_string(cfg.image) + " image, got " +
                         shape_str(image.shape()));
  }
  if (cond.shape() != Shape{cfg.text.d_cond}) {
    throw DimensionError("conditioning vector must be [" +
                         std::to_string(cfg.text.d_cond) + "], got " +
                         shape_str(cond.shape()));
  }
  const double slope = cfg.lrelu_slope;
  const int bottleneck = cfg.image / 4;

  auto e1 = leaky_relu(enc1_(image), slope);
  auto e2 = leaky_relu(enc2_(e1), slope);
  auto fused = concat_channels(e2, tile_spatial(cond, bottleneck, bottleneck));
  auto h = leaky_relu(merge_(fused), slope);
  for (std::size_t b = 0; b + 1 < res_.size(); b += 2) {
    auto t = leaky_relu(res_[b](h), slope);
    t = res_[b + 1](t);
    h = add(h, t);
  }
  auto d1 = leaky_relu(dec1_(upsample_nearest2x(h)), slope);
  d1 = add(d1, skip_(e1));
  auto d2 = leaky_relu(dec2_(upsample_nearest2x(d1)), slope);
  return tanh(out_(d2));
}

template <typename S>
GeneratedImage<S> BoundGenerator<S>::generate(ad::Tensor<S> image,
                                              const std::vector<int>& token_ids,
                                              Rng& rng,
                                              bool deterministic) const {
  GeneratedImage<S> out;
  auto words = text_.encode_words(token_ids);
  out.cond = text_.condition_augment(words, rng, deterministic);
  out.image = generate_from(image, out.cond.sample);
  return out;
}

template <typename S>
ad::Tensor<S> reconstruction_loss(ad::Tensor<S> x, ad::Tensor<S> y) {
  if (x.shape() != y.shape()) {
    throw DimensionError("reconstruction_loss: shape mismatch " +
                         shape_str(x.shape()) + " vs " + shape_str(y.shape()));
  }
  return ad::mean(ad::abs(ad::sub(x, y)));
}

template <typename S>
std::vector<std::vector<S>> interpolate_condition(
    const GeneratorParams<S>& params, const std::vector<int>& ids_a,
    const std::vector<int>& ids_b, int steps) {
  if (steps < 2) throw ContractError("interpolation needs steps >= 2");
  ad::Graph<S> graph;
  auto text = params.text.bind(graph, /*frozen=*/true);
  Rng unused(0);
  auto cond_a =
      text.condition_augment(text.encode_words(ids_a), unused, true);
  auto cond_b =
      text.condition_augment(text.encode_words(ids_b), unused, true);
  const auto& mu_a = cond_a.mu.value();
  const auto& mu_b = cond_b.mu.value();

  std::vector<std::vector<S>> out;
  out.reserve(static_cast<std::size_t>(steps));
  for (int k = 0; k < steps; ++k) {
    const S lambda = static_cast<S>(k) / static_cast<S>(steps - 1);
    std::vector<S> v(mu_a.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
      v[i] = mu_a[i] + lambda * (mu_b[i] - mu_a[i]);
    }
    out.push_back(std::move(v));
  }
  return out;
}

#define TAGAN_INSTANTIATE_GEN(S)                                             \
  template struct GeneratorParams<S>;                                        \
  template class BoundGenerator<S>;                                          \
  template ad::Tensor<S> reconstruction_loss(ad::Tensor<S>, ad::Tensor<S>);  \
  template std::vector<std::vector<S>> interpolate_condition(                \
      const GeneratorParams<S>&, const std::vector<int>&,                    \
      const std::vector<int>&, int);

TAGAN_INSTANTIATE_GEN(float)
TAGAN_INSTANTIATE_GEN(double)

#undef TAGAN_INSTANTIATE_GEN

}  // namespace tagan
