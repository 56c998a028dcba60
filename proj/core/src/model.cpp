// SPDX-License-Identifier: Apache-2.0
#include "tagan/model.hpp"

namespace tagan {

ModelConfig ModelConfig::from_run_config(const RunConfig& cfg, int vocab_size) {
  ModelConfig m;
  m.vocab_size = vocab_size;
  m.d_word = cfg.d_word;
  m.d_cond = cfg.d_cond;
  m.pyr_channels = cfg.pyr_channels;
  m.gen_channels = cfg.gen_channels;
  m.disc_scales = cfg.disc_scales;
  m.res_blocks = cfg.res_blocks;
  return m;
}

GeneratorConfig ModelConfig::generator_config() const {
  GeneratorConfig g;
  g.text.vocab_size = vocab_size;
  g.text.d_word = d_word;
  g.text.d_cond = d_cond;
  g.text.scales = 0;
  g.image = image;
  g.widths = gen_channels;
  g.res_blocks = res_blocks;
  return g;
}

DiscriminatorConfig ModelConfig::discriminator_config() const {
  DiscriminatorConfig d;
  d.text.vocab_size = vocab_size;
  d.text.d_word = d_word;
  d.text.d_cond = 0;
  d.text.scales = static_cast<int>(disc_scales.size());
  d.pyramid.image = image;
  d.pyramid.channels = pyr_channels;
  d.scale_stages = disc_scales;
  return d;
}

template <typename S>
TaganModel<S> TaganModel<S>::create(const ModelConfig& cfg,
                                    std::uint64_t init_seed) {
  TaganModel<S> model;
  model.cfg = cfg;
  Rng gen_rng(derive_seed(init_seed, 0x6e47));
  Rng disc_rng(derive_seed(init_seed, 0xd15c));
  model.generator = GeneratorParams<S>::create(model.store, "gen",
                                               cfg.generator_config(), gen_rng);
  model.discriminator = DiscriminatorParams<S>::create(
      model.store, "disc", cfg.discriminator_config(), disc_rng);
  return model;
}

template <typename S>
void TaganModel<S>::append_params(Checkpoint& ckpt) const {
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Parameter<S>& p = store[i];
    ckpt.add(p.name, p.value);
  }
}

template <typename S>
void TaganModel<S>::load_params(const Checkpoint& ckpt) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    Parameter<S>& p = store[i];
    TensorData<S> loaded = ckpt.get<S>(p.name);
    if (loaded.shape != p.value.shape) {
      throw IoError("checkpoint tensor '" + p.name + "' has shape " +
                    shape_str(loaded.shape) + ", model expects " +
                    shape_str(p.value.shape));
    }
    p.value = std::move(loaded);
  }
}

template struct TaganModel<float>;
template struct TaganModel<double>;

}  // namespace tagan
