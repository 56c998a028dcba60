// SPDX-License-Identifier: Apache-2.0
#include "tagan/discriminator.hpp"

#include <algorithm>
#include <cmath>

namespace tagan {

void DiscriminatorConfig::validate() const {
  if (scale_stages.empty()) throw ContractError("discriminator needs >= 1 scale");
  for (int s : scale_stages) {
    if (s < 0 || s >= pyramid.stages()) {
      throw ContractError("scale stage " + std::to_string(s) +
                          " outside pyramid with " +
                          std::to_string(pyramid.stages()) + " stages");
    }
  }
  if (text.scales != num_scales()) {
    throw ContractError("text encoder layer head (" + std::to_string(text.scales) +
                        ") does not match discriminator scales (" +
                        std::to_string(num_scales()) + ")");
  }
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) {
    throw ContractError("clamp_eps must lie in (0, 0.5)");
  }
}

template <typename S>
AggregateResult<S> aggregate_word_scores(ad::Tensor<S> f, ad::Tensor<S> alpha,
                                         ad::Tensor<S> beta, double clamp_eps) {
  if (f.shape().size() != 2 || beta.shape() != f.shape()) {
    throw DimensionError("aggregate: f and beta must be matching [T,J] matrices");
  }
  const int t_len = f.shape()[0];
  if (alpha.shape() != Shape{t_len}) {
    throw DimensionError("aggregate: alpha must be [T]");
  }
  std::vector<ad::Tensor<S>> mixed(static_cast<std::size_t>(t_len));
  for (int i = 0; i < t_len; ++i) {
    mixed[static_cast<std::size_t>(i)] = ad::dot(ad::row(beta, i), ad::row(f, i));
  }
  AggregateResult<S> out;
  out.m = ad::stack_scalars(std::span<const ad::Tensor<S>>(mixed));
  auto log_m = ad::log(ad::clamp(out.m, clamp_eps, 1.0 - clamp_eps));
  out.log_d = ad::dot(alpha, log_m);
  out.d = ad::exp(out.log_d);
  return out;
}

template <typename S>
DiscriminatorParams<S> DiscriminatorParams<S>::create(
    ParamStore<S>& store, const std::string& prefix,
    const DiscriminatorConfig& cfg, Rng& rng) {
  cfg.validate();
  DiscriminatorParams p;
  p.cfg = cfg;
  p.text = TextEncoderParams<S>::create(store, prefix + "/text", cfg.text, rng);
  p.pyramid = PyramidParams<S>::create(store, prefix + "/pyr", cfg.pyramid, rng);
  for (int j = 0; j < cfg.num_scales(); ++j) {
    const int c_j = cfg.pyramid.channels[cfg.scale_stages[j]];
    p.weight_gen.push_back(nn::LinearParams<S>::create(
        store, prefix + "/bank/s" + std::to_string(j), cfg.text.d_word, c_j + 1,
        rng));
  }
  const int deepest = cfg.pyramid.stages() - 1;
  const int side = cfg.pyramid.stage_size(deepest);
  p.uncond_head = nn::ConvParams<S>::create(store, prefix + "/head",
                                            cfg.pyramid.channels[deepest], 1,
                                            side, /*stride=*/1, /*pad=*/0, rng);
  return p;
}

template <typename S>
BoundDiscriminator<S> DiscriminatorParams<S>::bind(ad::Graph<S>& graph,
                                                   bool frozen) const {
  return BoundDiscriminator<S>(this, &graph, nn::Binder<S>{&graph, frozen});
}

template <typename S>
BoundDiscriminator<S>::BoundDiscriminator(const DiscriminatorParams<S>* params,
                                          ad::Graph<S>* graph,
                                          const nn::Binder<S>& binder)
    : params_(params),
      graph_(graph),
      text_(params->text.bind(*graph, binder.frozen)),
      pyramid_(params->pyramid.bind(*graph, binder.frozen)) {
  for (const auto& gen : params->weight_gen) {
    weight_gen_.push_back(nn::bind(gen, binder));
  }
  uncond_head_ = nn::bind(params->uncond_head, binder);
}

template <typename S>
TextFeatureBundle<S> BoundDiscriminator<S>::text_features(
    const std::vector<int>& token_ids) const {
  TextFeatureBundle<S> out;
  out.words = text_.encode_words(token_ids);
  out.alpha = text_.word_attention(out.words);
  out.beta = text_.layer_weights(out.words);
  return out;
}

template <typename S>
ad::Tensor<S> BoundDiscriminator<S>::local_score(ad::Tensor<S> word_vec,
                                                 ad::Tensor<S> pooled,
                                                 int scale) const {
  if (scale < 0 || scale >= params_->cfg.num_scales()) {
    throw ContractError("local_score: scale " + std::to_string(scale) +
                        " out of range");
  }
  const int c_j = params_->scale_channels(scale);
  auto generated = weight_gen_[static_cast<std::size_t>(scale)](word_vec);
  auto weight = ad::slice(generated, 0, c_j);
  auto bias = ad::slice(generated, c_j, 1);
  if (pooled.shape() != Shape{c_j}) {
    throw DimensionError("local_score: pooled vector " + shape_str(pooled.shape()) +
                         " does not match scale channels " + std::to_string(c_j));
  }
  return ad::sigmoid(ad::add(ad::dot(weight, pooled), bias));
}

template <typename S>
ConditionalScore<S> BoundDiscriminator<S>::conditional_score_from(
    const TextFeatureBundle<S>& text, const FeaturePyramid<S>& pyr) const {
  const int t_len = text.words.w.shape()[0];
  const int j_len = params_->cfg.num_scales();

  std::vector<ad::Tensor<S>> f_rows(static_cast<std::size_t>(t_len));
  for (int i = 0; i < t_len; ++i) {
    auto word_vec = ad::row(text.words.w, i);
    std::vector<ad::Tensor<S>> scores(static_cast<std::size_t>(j_len));
    for (int j = 0; j < j_len; ++j) {
      const int stage = params_->cfg.scale_stages[static_cast<std::size_t>(j)];
      scores[static_cast<std::size_t>(j)] =
          local_score(word_vec, pyr.vectors[static_cast<std::size_t>(stage)], j);
    }
    f_rows[static_cast<std::size_t>(i)] =
        ad::stack_scalars(std::span<const ad::Tensor<S>>(scores));
  }

  ConditionalScore<S> out;
  out.f = ad::stack_rows(std::span<const ad::Tensor<S>>(f_rows));
  out.alpha = text.alpha;
  out.beta = text.beta;
  auto agg = aggregate_word_scores(out.f, out.alpha, out.beta,
                                   params_->cfg.clamp_eps);
  out.m = agg.m;
  out.log_d = agg.log_d;
  out.d = agg.d;
  return out;
}

template <typename S>
ConditionalScore<S> BoundDiscriminator<S>::conditional_score(
    ad::Tensor<S> image, const std::vector<int>& token_ids) const {
  return conditional_score_from(text_features(token_ids), pyramid(image));
}

template <typename S>
ad::Tensor<S> BoundDiscriminator<S>::unconditional_score(
    const FeaturePyramid<S>& pyr) const {
  auto logit = uncond_head_(pyr.maps.back());
  return ad::sigmoid(ad::reshape(logit, {1}));
}

// ---------------------------------------------------------------------------
// Saliency
// ---------------------------------------------------------------------------

template <typename S>
SaliencyMap<S> saliency_map(const DiscriminatorParams<S>& params,
                            const TensorData<S>& image,
                            const std::vector<int>& token_ids, int word_index,
                            int scale_index) {
  const int t_len = static_cast<int>(token_ids.size());
  if (word_index < 0 || word_index >= t_len) {
    throw ContractError("saliency: word index " + std::to_string(word_index) +
                        " out of range for caption of length " +
                        std::to_string(t_len));
  }
  if (scale_index < 0 || scale_index >= params.cfg.num_scales()) {
    throw ContractError("saliency: scale index " + std::to_string(scale_index) +
                        " out of range");
  }

  ad::Graph<S> graph;
  auto disc = params.bind(graph, /*frozen=*/true);
  auto text = disc.text_features(token_ids);
  auto pyr = disc.pyramid(graph.constant(image));

  const int stage = params.cfg.scale_stages[static_cast<std::size_t>(scale_index)];
  const auto& map_vals = pyr.maps[static_cast<std::size_t>(stage)].value();
  const int c_j = params.scale_channels(scale_index);
  const int side = params.cfg.pyramid.stage_size(stage);

  // Generated affine functional for (word, scale).
  auto word_vec = ad::row(text.words.w, word_index);
  auto generated =
      nn::bind(params.weight_gen[static_cast<std::size_t>(scale_index)],
               nn::Binder<S>{&graph, true})(word_vec);
  const auto& gen_vals = generated.value();

  SaliencyMap<S> out;
  out.raw = TensorData<S>({side, side});
  const S gen_bias = gen_vals[static_cast<std::size_t>(c_j)];
  for (int p = 0; p < side * side; ++p) {
    S acc = gen_bias;
    for (int c = 0; c < c_j; ++c) {
      acc += gen_vals[static_cast<std::size_t>(c)] *
             map_vals[static_cast<std::size_t>(c) * side * side + p];
    }
    out.raw.data[static_cast<std::size_t>(p)] = acc;
  }

  auto [mn_it, mx_it] =
      std::minmax_element(out.raw.data.begin(), out.raw.data.end());
  out.normalized = TensorData<S>({side, side});
  const S mn = *mn_it, mx = *mx_it;
  if (mx > mn) {
    for (std::size_t p = 0; p < out.raw.data.size(); ++p) {
      out.normalized.data[p] = (out.raw.data[p] - mn) / (mx - mn);
    }
  }  // flat maps normalize to all zeros by convention

  out.alpha = static_cast<double>(text.alpha.value()[word_index]);
  const int j_len = params.cfg.num_scales();
  for (int j = 0; j < j_len; ++j) {
    out.beta.push_back(static_cast<double>(
        text.beta.value()[static_cast<std::size_t>(word_index) * j_len + j]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Cached scoring
// ---------------------------------------------------------------------------

template <typename S>
TextScoreCache build_text_cache(const DiscriminatorParams<S>& params,
                                const std::vector<int>& token_ids) {
  ad::Graph<S> graph;
  auto disc = params.bind(graph, /*frozen=*/true);
  auto text = disc.text_features(token_ids);
  const int t_len = static_cast<int>(token_ids.size());
  const int j_len = params.cfg.num_scales();

  TextScoreCache cache;
  cache.words = t_len;
  cache.scales = j_len;
  cache.alpha.assign(text.alpha.value().begin(), text.alpha.value().end());
  cache.beta.assign(text.beta.value().begin(), text.beta.value().end());
  cache.gen_weight.resize(static_cast<std::size_t>(t_len) * j_len);
  cache.gen_bias.resize(static_cast<std::size_t>(t_len) * j_len);
  for (int i = 0; i < t_len; ++i) {
    auto word_vec = ad::row(text.words.w, i);
    for (int j = 0; j < j_len; ++j) {
      const int c_j = params.scale_channels(j);
      auto generated = nn::bind(params.weight_gen[static_cast<std::size_t>(j)],
                                nn::Binder<S>{&graph, true})(word_vec);
      const auto& vals = generated.value();
      auto& w = cache.gen_weight[static_cast<std::size_t>(i) * j_len + j];
      w.assign(vals.begin(), vals.begin() + c_j);
      cache.gen_bias[static_cast<std::size_t>(i) * j_len + j] =
          static_cast<double>(vals[static_cast<std::size_t>(c_j)]);
    }
  }
  return cache;
}

template <typename S>
ImageScoreCache build_image_cache(const DiscriminatorParams<S>& params,
                                  const TensorData<S>& image) {
  ad::Graph<S> graph;
  auto disc = params.bind(graph, /*frozen=*/true);
  auto pyr = disc.pyramid(graph.constant(image));
  ImageScoreCache cache;
  for (int j = 0; j < params.cfg.num_scales(); ++j) {
    const int stage = params.cfg.scale_stages[static_cast<std::size_t>(j)];
    const auto& v = pyr.vectors[static_cast<std::size_t>(stage)].value();
    cache.pooled.emplace_back(v.begin(), v.end());
  }
  return cache;
}

double score_cached(const TextScoreCache& text, const ImageScoreCache& image,
                    double clamp_eps) {
  double log_d = 0.0;
  for (int i = 0; i < text.words; ++i) {
    double mixed = 0.0;
    for (int j = 0; j < text.scales; ++j) {
      const auto& w = text.gen_weight[static_cast<std::size_t>(i) * text.scales + j];
      const auto& v = image.pooled[static_cast<std::size_t>(j)];
      double logit = text.gen_bias[static_cast<std::size_t>(i) * text.scales + j];
      for (std::size_t c = 0; c < w.size(); ++c) logit += w[c] * v[c];
      const double f = logit >= 0 ? 1.0 / (1.0 + std::exp(-logit))
                                  : std::exp(logit) / (1.0 + std::exp(logit));
      mixed += text.beta[static_cast<std::size_t>(i) * text.scales + j] * f;
    }
    mixed = std::clamp(mixed, clamp_eps, 1.0 - clamp_eps);
    log_d += text.alpha[static_cast<std::size_t>(i)] * std::log(mixed);
  }
  return std::exp(log_d);
}

#define TAGAN_INSTANTIATE_DISC(S)                                              \
  template struct DiscriminatorParams<S>;                                      \
  template class BoundDiscriminator<S>;                                        \
  template AggregateResult<S> aggregate_word_scores(ad::Tensor<S>,             \
                                                    ad::Tensor<S>,             \
                                                    ad::Tensor<S>, double);    \
  template SaliencyMap<S> saliency_map(const DiscriminatorParams<S>&,          \
                                       const TensorData<S>&,                   \
                                       const std::vector<int>&, int, int);     \
  template TextScoreCache build_text_cache(const DiscriminatorParams<S>&,      \
                                           const std::vector<int>&);           \
  template ImageScoreCache build_image_cache(const DiscriminatorParams<S>&,    \
                                             const TensorData<S>&);

TAGAN_INSTANTIATE_DISC(float)
TAGAN_INSTANTIATE_DISC(double)

#undef TAGAN_INSTANTIATE_DISC

}  // namespace tagan
