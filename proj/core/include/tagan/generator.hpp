// SPDX-License-Identifier: Apache-2.0
//
// Encoder-residual-decoder generator: the input image is encoded, fused
// with a sampled text conditioning vector at the bottleneck, transformed
// through residual blocks and decoded with nearest-neighbor upsampling plus
// a projected skip connection; tanh keeps the output in [-1, 1].
#pragma once

#include <string>
#include <vector>

#include "tagan/autodiff.hpp"
#include "tagan/text_encoder.hpp"

namespace tagan {

struct GeneratorConfig {
  TextEncoderConfig text;  // d_cond > 0 required
  int image = 32;
  int in_channels = 3;
  std::vector<int> widths = {16, 32};  // two downsampling stages
  int res_blocks = 2;
  double lrelu_slope = 0.2;

  void validate() const;
};

template <typename S>
class BoundGenerator;

template <typename S>
struct GeneratorParams {
  GeneratorConfig cfg;
  TextEncoderParams<S> text;
  nn::ConvParams<S> enc1, enc2;
  nn::ConvParams<S> merge;
  std::vector<nn::ConvParams<S>> res;  // 2 convs per block, flattened
  nn::ConvParams<S> dec1, skip, dec2, out;

  static GeneratorParams create(ParamStore<S>& store, const std::string& prefix,
                                const GeneratorConfig& cfg, Rng& rng);

  BoundGenerator<S> bind(ad::Graph<S>& graph, bool frozen = false) const;
};

template <typename S>
struct GeneratedImage {
  ad::Tensor<S> image;            // [3, image, image] in [-1, 1]
  SentenceConditioning<S> cond;   // sampled conditioning (kl attached)
};

template <typename S>
class BoundGenerator {
public:
  BoundGenerator(const GeneratorParams<S>* params, ad::Graph<S>* graph,
                 const nn::Binder<S>& binder);

  const BoundTextEncoder<S>& text_encoder() const { return text_; }

  /// Decode with an explicit conditioning vector (graph tensor of d_cond).
  ad::Tensor<S> generate_from(ad::Tensor<S> image, ad::Tensor<S> cond) const;

  /// Full pass: encode caption, sample conditioning, decode. deterministic
  /// forces sigma = 0 so the output is a pure function of (x, t, params).
  GeneratedImage<S> generate(ad::Tensor<S> image,
                             const std::vector<int>& token_ids, Rng& rng,
                             bool deterministic = false) const;

private:
  const GeneratorParams<S>* params_;
  ad::Graph<S>* graph_;
  BoundTextEncoder<S> text_;
  nn::BoundConv<S> enc1_, enc2_, merge_;
  std::vector<nn::BoundConv<S>> res_;
  nn::BoundConv<S> dec1_, skip_, dec2_, out_;
};

/// Mean absolute difference (the training reconstruction penalty).
template <typename S>
ad::Tensor<S> reconstruction_loss(ad::Tensor<S> x, ad::Tensor<S> y);

/// Conditioning means of two captions linearly interpolated in `steps`
/// points (endpoints included); feed each through generate_from with the
/// deterministic conditioning path.
template <typename S>
std::vector<std::vector<S>> interpolate_condition(
    const GeneratorParams<S>& params, const std::vector<int>& ids_a,
    const std::vector<int>& ids_b, int steps);

#define TAGAN_EXTERN_GEN(S)                                                  \
  extern template struct GeneratorParams<S>;                                 \
  extern template class BoundGenerator<S>;                                   \
  extern template ad::Tensor<S> reconstruction_loss(ad::Tensor<S>,           \
                                                    ad::Tensor<S>);          \
  extern template std::vector<std::vector<S>> interpolate_condition(         \
      const GeneratorParams<S>&, const std::vector<int>&,                    \
      const std::vector<int>&, int);
TAGAN_EXTERN_GEN(float)
TAGAN_EXTERN_GEN(double)
#undef TAGAN_EXTERN_GEN

}  // namespace tagan
