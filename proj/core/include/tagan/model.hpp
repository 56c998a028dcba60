// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagan/checkpoint.hpp"
#include "tagan/discriminator.hpp"
#include "tagan/generator.hpp"
#include "tagan/run_config.hpp"

namespace tagan {

/// Dimensions shared by both networks; derived from a RunConfig plus the
/// dataset vocabulary.
struct ModelConfig {
  int vocab_size = 0;
  int image = 32;
  int d_word = 32;
  int d_cond = 16;
  std::vector<int> pyr_channels = {32, 64, 128};
  std::vector<int> gen_channels = {16, 32};
  std::vector<int> disc_scales = {0, 1, 2};
  int res_blocks = 2;

  static ModelConfig from_run_config(const RunConfig& cfg, int vocab_size);
  GeneratorConfig generator_config() const;
  DiscriminatorConfig discriminator_config() const;
};

/// The full trainable model. The generator and the discriminator each own
/// an independent text encoder; parameter names are prefixed "gen/" and
/// "disc/" so optimizers and leak checks can address either side.
template <typename S>
struct TaganModel {
  ModelConfig cfg;
  ParamStore<S> store;
  GeneratorParams<S> generator;
  DiscriminatorParams<S> discriminator;

  static TaganModel create(const ModelConfig& cfg, std::uint64_t init_seed);

  std::vector<Parameter<S>*> generator_group() { return store.group("gen/"); }
  std::vector<Parameter<S>*> discriminator_group() { return store.group("disc/"); }

  /// Append every parameter tensor (creation order) to a checkpoint.
  void append_params(Checkpoint& ckpt) const;
  /// Overwrite parameter values from a checkpoint (names and shapes must
  /// match exactly).
  void load_params(const Checkpoint& ckpt);
};

#define TAGAN_EXTERN_MODEL(S) extern template struct TaganModel<S>;
TAGAN_EXTERN_MODEL(float)
TAGAN_EXTERN_MODEL(double)
#undef TAGAN_EXTERN_MODEL

}  // namespace tagan
