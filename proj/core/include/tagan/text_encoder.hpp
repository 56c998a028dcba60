// SPDX-License-Identifier: Apache-2.0
//
// Caption -> per-word feature vectors w_i (bidirectional GRU, summed
// directions), temporal average u, word attention alpha, per-word layer
// weights beta, and Gaussian sentence conditioning with a closed-form KL.
#pragma once

#include <string>
#include <vector>

#include "tagan/autodiff.hpp"
#include "tagan/nn.hpp"
#include "tagan/rng.hpp"
#include "tagan/vocab.hpp"

namespace tagan {

struct TextEncoderConfig {
  int vocab_size = 0;
  int d_word = 32;
  int scales = 0;  // J > 0 adds the layer-weight projection head
  int d_cond = 0;  // > 0 adds the conditioning-augmentation head
};

template <typename S>
struct WordFeatures {
  ad::Tensor<S> w;  // [T, d_word]
  ad::Tensor<S> u;  // [d_word], temporal average of the w_i
};

template <typename S>
struct SentenceConditioning {
  ad::Tensor<S> mu;         // [d_cond]
  ad::Tensor<S> log_sigma;  // [d_cond]
  ad::Tensor<S> sample;     // mu + exp(log_sigma) .* eps
  ad::Tensor<S> kl;         // [1], KL(N(mu, sigma^2) || N(0, I))
};

template <typename S>
class BoundTextEncoder;

template <typename S>
struct TextEncoderParams {
  TextEncoderConfig cfg;
  Parameter<S>* embedding = nullptr;  // [vocab, d_word]
  nn::GruParams<S> gru_fwd{}, gru_bwd{};
  Parameter<S>* layer_proj = nullptr;  // [scales, d_word]
  nn::LinearParams<S> ca_mu{}, ca_log_sigma{};

  static TextEncoderParams create(ParamStore<S>& store, const std::string& prefix,
                                  const TextEncoderConfig& cfg, Rng& rng);

  BoundTextEncoder<S> bind(ad::Graph<S>& graph, bool frozen = false) const;
};

/// Parameters bound into one graph; reusable across captions in that graph.
template <typename S>
class BoundTextEncoder {
public:
  BoundTextEncoder(const TextEncoderParams<S>* params, ad::Graph<S>* graph,
                   const nn::Binder<S>& binder);

  /// w_i = forward-GRU state + backward-GRU state at position i; u = mean_i w_i.
  WordFeatures<S> encode_words(const std::vector<int>& token_ids) const;

  /// alpha_i = softmax_i(u . w_i).
  ad::Tensor<S> word_attention(const WordFeatures<S>& f) const;

  /// beta_i = softmax_j(P w_i); rows of the result live on the simplex.
  ad::Tensor<S> layer_weights(const WordFeatures<S>& f) const;

  /// Reparameterized Gaussian conditioning around an affine map of u.
  /// With deterministic set, sigma is forced to zero and sample == mu.
  SentenceConditioning<S> condition_augment(const WordFeatures<S>& f, Rng& rng,
                                            bool deterministic = false) const;

  ad::Graph<S>& graph() const { return *graph_; }
  const TextEncoderConfig& config() const { return params_->cfg; }

private:
  const TextEncoderParams<S>* params_;
  ad::Graph<S>* graph_;
  ad::Tensor<S> embedding_;
  nn::BoundGru<S> fwd_, bwd_;
  ad::Tensor<S> layer_proj_;
  nn::BoundLinear<S> ca_mu_, ca_log_sigma_;
};

#define TAGAN_EXTERN_TEXT(S)                    \
  extern template struct TextEncoderParams<S>;  \
  extern template class BoundTextEncoder<S>;
TAGAN_EXTERN_TEXT(float)
TAGAN_EXTERN_TEXT(double)
#undef TAGAN_EXTERN_TEXT

}  // namespace tagan
