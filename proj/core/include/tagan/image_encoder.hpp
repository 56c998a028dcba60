// SPDX-License-Identifier: Apache-2.0
//
// Convolutional pyramid: strided conv + leaky-rectifier stages halving the
// spatial size, each stage paired with its globally pooled vector.
#pragma once

#include <string>
#include <vector>

#include "tagan/autodiff.hpp"
#include "tagan/nn.hpp"

namespace tagan {

struct PyramidConfig {
  int in_channels = 3;
  int image = 32;
  std::vector<int> channels = {32, 64, 128};
  int kernel = 4;
  double lrelu_slope = 0.2;

  int stages() const { return static_cast<int>(channels.size()); }
  /// Spatial side of stage j (0 = finest).
  int stage_size(int j) const { return image >> (j + 1); }
};

template <typename S>
struct FeaturePyramid {
  std::vector<ad::Tensor<S>> maps;     // maps[j]: [c_j, s_j, s_j]
  std::vector<ad::Tensor<S>> vectors;  // vectors[j]: [c_j] = pooled maps[j]
};

template <typename S>
class BoundPyramid;

template <typename S>
struct PyramidParams {
  PyramidConfig cfg;
  std::vector<nn::ConvParams<S>> stages;

  static PyramidParams create(ParamStore<S>& store, const std::string& prefix,
                              const PyramidConfig& cfg, Rng& rng);

  BoundPyramid<S> bind(ad::Graph<S>& graph, bool frozen = false) const;
};

template <typename S>
class BoundPyramid {
public:
  BoundPyramid(const PyramidConfig& cfg, std::vector<nn::BoundConv<S>> stages)
      : cfg_(cfg), stages_(std::move(stages)) {}

  /// Forward pass over one image; pooled vectors attached per stage.
  FeaturePyramid<S> encode(ad::Tensor<S> image) const;

  const PyramidConfig& config() const { return cfg_; }

private:
  PyramidConfig cfg_;
  std::vector<nn::BoundConv<S>> stages_;
};

#define TAGAN_EXTERN_PYR(S)                 \
  extern template struct PyramidParams<S>;  \
  extern template class BoundPyramid<S>;
TAGAN_EXTERN_PYR(float)
TAGAN_EXTERN_PYR(double)
#undef TAGAN_EXTERN_PYR

}  // namespace tagan
