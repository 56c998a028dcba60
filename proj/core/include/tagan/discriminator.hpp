// SPDX-License-Identifier: Apache-2.0
//
// Text-adaptive discriminator: word-level local discriminators generated on
// the fly from word vectors, mixed across image scales by per-word layer
// weights and aggregated into one score by an attention-weighted geometric
// mean, evaluated in log space.
#pragma once

#include <string>
#include <vector>

#include "tagan/autodiff.hpp"
#include "tagan/image_encoder.hpp"
#include "tagan/text_encoder.hpp"

namespace tagan {

struct DiscriminatorConfig {
  TextEncoderConfig text;       // text.scales must equal scale_stages.size()
  PyramidConfig pyramid;
  std::vector<int> scale_stages = {0, 1, 2};  // pyramid stages with local discriminators
  double clamp_eps = 1e-7;      // mixed scores clamped to [eps, 1-eps] before log

  int num_scales() const { return static_cast<int>(scale_stages.size()); }
  void validate() const;
};

/// Result of aggregating the [T, J] local-discriminator score matrix.
template <typename S>
struct AggregateResult {
  ad::Tensor<S> m;      // [T], per-word mixed scores sum_j beta_ij f_ij
  ad::Tensor<S> log_d;  // [1], sum_i alpha_i log m_i
  ad::Tensor<S> d;      // [1], exp(log_d)
};

/// Full conditional score with per-word diagnostics for inspection.
template <typename S>
struct ConditionalScore {
  ad::Tensor<S> f;      // [T, J], each entry in (0,1)
  ad::Tensor<S> m;      // [T]
  ad::Tensor<S> alpha;  // [T]
  ad::Tensor<S> beta;   // [T, J]
  ad::Tensor<S> log_d;  // [1]
  ad::Tensor<S> d;      // [1]
};

/// exp(sum_i alpha_i log clamp(sum_j beta_ij f_ij)). The log-space path is
/// the numerically stable evaluation of the product form; zero-attention
/// words contribute exactly zero terms.
template <typename S>
AggregateResult<S> aggregate_word_scores(ad::Tensor<S> f, ad::Tensor<S> alpha,
                                         ad::Tensor<S> beta, double clamp_eps);

template <typename S>
struct TextFeatureBundle {
  WordFeatures<S> words;
  ad::Tensor<S> alpha;  // [T]
  ad::Tensor<S> beta;   // [T, J]
};

template <typename S>
class BoundDiscriminator;

template <typename S>
struct DiscriminatorParams {
  DiscriminatorConfig cfg;
  TextEncoderParams<S> text;
  PyramidParams<S> pyramid;
  // Per scale: one affine map d_word -> (c_j + 1); the first c_j outputs are
  // the generated weight vector, the last is the generated bias.
  std::vector<nn::LinearParams<S>> weight_gen;
  nn::ConvParams<S> uncond_head;  // deepest map -> 1x1x1 logit

  static DiscriminatorParams create(ParamStore<S>& store,
                                    const std::string& prefix,
                                    const DiscriminatorConfig& cfg, Rng& rng);

  BoundDiscriminator<S> bind(ad::Graph<S>& graph, bool frozen = false) const;

  int scale_channels(int j) const {
    return cfg.pyramid.channels[cfg.scale_stages[j]];
  }
};

template <typename S>
class BoundDiscriminator {
public:
  BoundDiscriminator(const DiscriminatorParams<S>* params, ad::Graph<S>* graph,
                     const nn::Binder<S>& binder);

  FeaturePyramid<S> pyramid(ad::Tensor<S> image) const {
    return pyramid_.encode(image);
  }

  /// Word features, attention, and layer weights for one caption.
  TextFeatureBundle<S> text_features(const std::vector<int>& token_ids) const;

  /// f_{w,j}(v) = sigmoid(W_j(w) . v + b_j(w)) for scale index j.
  ad::Tensor<S> local_score(ad::Tensor<S> word_vec, ad::Tensor<S> pooled,
                            int scale) const;

  ConditionalScore<S> conditional_score_from(const TextFeatureBundle<S>& text,
                                             const FeaturePyramid<S>& pyr) const;

  /// End-to-end D(x, t).
  ConditionalScore<S> conditional_score(ad::Tensor<S> image,
                                        const std::vector<int>& token_ids) const;

  /// Unconditional D(x): sigmoid conv head on the deepest pyramid map.
  ad::Tensor<S> unconditional_score(const FeaturePyramid<S>& pyr) const;

  const BoundTextEncoder<S>& text_encoder() const { return text_; }
  const DiscriminatorConfig& config() const { return params_->cfg; }

private:
  const DiscriminatorParams<S>* params_;
  ad::Graph<S>* graph_;
  BoundTextEncoder<S> text_;
  BoundPyramid<S> pyramid_;
  std::vector<nn::BoundLinear<S>> weight_gen_;
  nn::BoundConv<S> uncond_head_;
};

// ---------------------------------------------------------------------------
// Saliency
// ---------------------------------------------------------------------------

template <typename S>
struct SaliencyMap {
  TensorData<S> raw;         // [s_j, s_j] pre-sigmoid activations
  TensorData<S> normalized;  // min-max scaled to [0,1]; all zeros when flat
  double alpha = 0;          // attention of the inspected word
  std::vector<double> beta;  // layer weights of the inspected word
};

/// Spatial response of word word_index's local discriminator at scale
/// scale_index: W_j(w_i) . maps[j][:, p] + b_j(w_i) per location p.
template <typename S>
SaliencyMap<S> saliency_map(const DiscriminatorParams<S>& params,
                            const TensorData<S>& image,
                            const std::vector<int>& token_ids, int word_index,
                            int scale_index);

// ---------------------------------------------------------------------------
// Cached plain-value scoring (retrieval-scale evaluation)
// ---------------------------------------------------------------------------

/// Per-caption quantities that do not depend on the image.
struct TextScoreCache {
  int words = 0;
  int scales = 0;
  std::vector<double> alpha;                        // [T]
  std::vector<double> beta;                         // [T*J]
  std::vector<std::vector<double>> gen_weight;      // [T*J][c_j]
  std::vector<double> gen_bias;                     // [T*J]
};

/// Per-image pooled vectors for the discriminator scales.
struct ImageScoreCache {
  std::vector<std::vector<double>> pooled;  // [J][c_j]
};

template <typename S>
TextScoreCache build_text_cache(const DiscriminatorParams<S>& params,
                                const std::vector<int>& token_ids);

template <typename S>
ImageScoreCache build_image_cache(const DiscriminatorParams<S>& params,
                                  const TensorData<S>& image);

/// D(x, t) from cached parts; identical math to the graph path.
double score_cached(const TextScoreCache& text, const ImageScoreCache& image,
                    double clamp_eps);

#define TAGAN_EXTERN_DISC(S)                                                   \
  extern template struct DiscriminatorParams<S>;                               \
  extern template class BoundDiscriminator<S>;                                 \
  extern template AggregateResult<S> aggregate_word_scores(                    \
      ad::Tensor<S>, ad::Tensor<S>, ad::Tensor<S>, double);                    \
  extern template SaliencyMap<S> saliency_map(                                 \
      const DiscriminatorParams<S>&, const TensorData<S>&,                     \
      const std::vector<int>&, int, int);                                      \
  extern template TextScoreCache build_text_cache(                             \
      const DiscriminatorParams<S>&, const std::vector<int>&);                 \
  extern template ImageScoreCache build_image_cache(                           \
      const DiscriminatorParams<S>&, const TensorData<S>&);
TAGAN_EXTERN_DISC(float)
TAGAN_EXTERN_DISC(double)
#undef TAGAN_EXTERN_DISC

}  // namespace tagan
