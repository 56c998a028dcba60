// SPDX-License-Identifier: Apache-2.0
#include "tagan/image_encoder.hpp"

namespace tagan {

template <typename S>
PyramidParams<S> PyramidParams<S>::create(ParamStore<S>& store,
                                          const std::string& prefix,
                                          const PyramidConfig& cfg, Rng& rng) {
  if (cfg.channels.empty()) throw ContractError("pyramid needs >= 1 stage");
  // Strided halving at every stage plus the global pool below the last one.
  if (cfg.image % (1 << (cfg.stages() + 1)) != 0) {
    throw DimensionError("pyramid input size " + std::to_string(cfg.image) +
                         " is not divisible by 2^" +
                         std::to_string(cfg.stages() + 1));
  }
  PyramidParams p;
  p.cfg = cfg;
  int in_ch = cfg.in_channels;
  const int pad = (cfg.kernel - 1) / 2;
  for (int j = 0; j < cfg.stages(); ++j) {
    p.stages.push_back(nn::ConvParams<S>::create(
        store, prefix + "/c" + std::to_string(j), in_ch, cfg.channels[j],
        cfg.kernel, /*stride=*/2, pad, rng));
    in_ch = cfg.channels[j];
  }
  return p;
}

template <typename S>
BoundPyramid<S> PyramidParams<S>::bind(ad::Graph<S>& graph, bool frozen) const {
  nn::Binder<S> binder{&graph, frozen};
  std::vector<nn::BoundConv<S>> bound;
  bound.reserve(stages.size());
  for (const auto& s : stages) bound.push_back(nn::bind(s, binder));
  return BoundPyramid<S>(cfg, std::move(bound));
}

template <typename S>
FeaturePyramid<S> BoundPyramid<S>::encode(ad::Tensor<S> image) const {
  if (image.shape() !=
      Shape{cfg_.in_channels, cfg_.image, cfg_.image}) {
    throw DimensionError("pyramid expects a " +
                         std::to_string(cfg_.in_channels) + "x" +
                         std::to_string(cfg_.image) + "x" +
                         std::to_string(cfg_.image) + " image, got " +
                         shape_str(image.shape()));
  }
  FeaturePyramid<S> out;
  ad::Tensor<S> x = image;
  for (const auto& stage : stages_) {
    x = ad::leaky_relu(stage(x), cfg_.lrelu_slope);
    out.maps.push_back(x);
    out.vectors.push_back(ad::global_avg_pool(x));
  }
  return out;
}

template struct PyramidParams<float>;
template struct PyramidParams<double>;
template class BoundPyramid<float>;
template class BoundPyramid<double>;

}  // namespace tagan
