// SPDX-License-Identifier: Apache-2.0
//
// Alternating adversarial training. Each batch runs one discriminator step
// (real/matching/mismatching text plus detached fakes, unconditional branch
// only on fakes) and one generator step (non-saturating adversarial terms,
// reconstruction with the positive text, KL regularizer).
//
// Per-sample losses are independent graphs: workers compute forward and
// backward in parallel, and the main thread reduces gradients in sample
// order so results do not depend on the thread count.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "tagan/adam.hpp"
#include "tagan/model.hpp"
#include "tagan/synth_data.hpp"

namespace tagan {

struct TrainSettings {
  double lr = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double lambda1 = 10.0;
  double lambda2 = 2.0;
  double kl_weight = 1e-2;
  int batch = 64;
  int epochs = 50;
  int lr_decay_epochs = 30;
  double lr_decay_factor = 0.5;
  std::uint64_t seed = 1;
  int checkpoint_interval = 10;
  int eval_interval = 0;
  bool literal_g_real_term = false;

  static TrainSettings from_run_config(const RunConfig& cfg);
  double lr_at(int epoch) const;
};

struct LossReport {
  int step = 0;
  int epoch = 0;
  double lr = 0;
  double d_total = 0, d_real_uncond = 0, d_real_cond = 0, d_mismatch = 0,
         d_fake = 0;
  double g_total = 0, g_adv_uncond = 0, g_adv_cond = 0, g_rec = 0, g_kl = 0;

  /// One newline-delimited record with named numeric fields.
  std::string log_line() const;
};

/// One assembled batch element: augmented image plus caption id sequences.
template <typename S>
struct TrainItem {
  TensorData<S> image;        // [3, 32, 32], augmented
  std::vector<int> pos_ids;   // matching caption t
  std::vector<int> neg_ids;   // mismatching caption t-hat
  std::uint64_t seed = 0;     // per-sample stream for conditioning noise
};

/// Random crop out of 2-pixel replicate padding, horizontal flip, and a
/// rotation in [-10, 10] degrees (nearest sampling, edge replicate).
template <typename S>
TensorData<S> augment_image(const TensorData<S>& image, Rng& rng);

/// Deterministic batch assembly: per-sample streams are derived from
/// (seed, epoch, dataset index) regardless of worker scheduling.
template <typename S>
std::vector<TrainItem<S>> assemble_batch(const synth::Dataset& dataset,
                                         std::span<const int> indices,
                                         int epoch, std::uint64_t seed,
                                         bool augment);

template <typename S>
class Trainer {
public:
  Trainer(TaganModel<S>& model, const TrainSettings& settings);

  /// Graph-level loss terms, exposed so tests can backpropagate single
  /// terms and assert gradient routing.
  struct DTerms {
    ad::Tensor<S> real_uncond;  // -log D(x)
    ad::Tensor<S> real_cond;    // -log D(x, t)
    ad::Tensor<S> mismatch;     // -log(1 - D(x, t_hat))
    ad::Tensor<S> fake_uncond;  // -log(1 - D(G(x, t_hat))), G detached
  };
  struct GTerms {
    ad::Tensor<S> adv_uncond;  // -log D(G(x, t_hat)) (or -log D(x) literal form)
    ad::Tensor<S> adv_cond;    // -log D(G(x, t_hat), t_hat)
    ad::Tensor<S> rec;         // |x - G(x, t)| mean
    ad::Tensor<S> kl;          // conditioning KL (both generator passes)
  };

  DTerms discriminator_terms(ad::Graph<S>& graph, const TrainItem<S>& item) const;
  GTerms generator_terms(ad::Graph<S>& graph, const TrainItem<S>& item) const;

  ad::Tensor<S> total_d_loss(const DTerms& t) const;
  ad::Tensor<S> total_g_loss(const GTerms& t) const;

  /// One optimization step each; gradients of the frozen side stay zero.
  LossReport discriminator_step(std::span<const TrainItem<S>> items, double lr);
  LossReport generator_step(std::span<const TrainItem<S>> items, double lr);

  AdamOptimizer<S>& generator_optimizer() { return gen_opt_; }
  AdamOptimizer<S>& discriminator_optimizer() { return disc_opt_; }
  TaganModel<S>& model() { return *model_; }
  const TrainSettings& settings() const { return settings_; }

private:
  struct FlatGroup {
    std::vector<Parameter<S>*> params;
    std::unordered_map<const Parameter<S>*, std::size_t> offset;
    std::size_t total = 0;
  };
  static FlatGroup make_group(std::vector<Parameter<S>*> params);

  /// Run fn per item in parallel, reduce flat gradients in item order,
  /// scale by 1/N and apply the optimizer.
  template <typename TermFn>
  void run_step(std::span<const TrainItem<S>> items, const FlatGroup& group,
                AdamOptimizer<S>& opt, double lr, const TermFn& fn);

  TaganModel<S>* model_;
  TrainSettings settings_;
  FlatGroup gen_group_, disc_group_;
  AdamOptimizer<S> gen_opt_, disc_opt_;
};

/// Full training run: dataset from cfg.dataset, checkpoints and the loss
/// log under cfg.out. Resumable from the latest checkpoint.
struct TrainRunResult {
  int steps_run = 0;
  int final_epoch = 0;
  std::string final_checkpoint;
};
TrainRunResult run_training(const RunConfig& cfg, bool resume = false,
                            bool force = false, std::ostream* console = nullptr);

#define TAGAN_EXTERN_TRAIN(S)                                                  \
  extern template struct TrainItem<S>;                                         \
  extern template class Trainer<S>;                                            \
  extern template TensorData<S> augment_image(const TensorData<S>&, Rng&);     \
  extern template std::vector<TrainItem<S>> assemble_batch(                    \
      const synth::Dataset&, std::span<const int>, int, std::uint64_t, bool);
TAGAN_EXTERN_TRAIN(float)
TAGAN_EXTERN_TRAIN(double)
#undef TAGAN_EXTERN_TRAIN

}  // namespace tagan
