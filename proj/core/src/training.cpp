// SPDX-License-Identifier: Apache-2.0
#include "tagan/training.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "tagan/threading.hpp"

namespace tagan {

namespace fs = std::filesystem;

TrainSettings TrainSettings::from_run_config(const RunConfig& cfg) {
  TrainSettings s;
  s.lr = cfg.lr;
  s.beta1 = cfg.beta1;
  s.beta2 = cfg.beta2;
  s.adam_eps = cfg.adam_eps;
  s.lambda1 = cfg.lambda1;
  s.lambda2 = cfg.lambda2;
  s.kl_weight = cfg.kl_weight;
  s.batch = cfg.batch;
  s.epochs = cfg.epochs;
  s.lr_decay_epochs = cfg.lr_decay_epochs;
  s.lr_decay_factor = cfg.lr_decay_factor;
  s.seed = cfg.seed;
  s.checkpoint_interval = cfg.checkpoint_interval;
  s.eval_interval = cfg.eval_interval;
  s.literal_g_real_term = cfg.literal_g_real_term;
  return s;
}

double TrainSettings::lr_at(int epoch) const {
  const int decays = epoch / lr_decay_epochs;
  return lr * std::pow(lr_decay_factor, static_cast<double>(decays));
}

std::string LossReport::log_line() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "step=%d epoch=%d lr=%.9g d_total=%.9g d_real_uncond=%.9g "
                "d_real_cond=%.9g d_mismatch=%.9g d_fake=%.9g g_total=%.9g "
                "g_adv_uncond=%.9g g_adv_cond=%.9g g_rec=%.9g g_kl=%.9g",
                step, epoch, lr, d_total, d_real_uncond, d_real_cond,
                d_mismatch, d_fake, g_total, g_adv_uncond, g_adv_cond, g_rec,
                g_kl);
  return buf;
}

// ---------------------------------------------------------------------------
// Augmentation and batch assembly
// ---------------------------------------------------------------------------

template <typename S>
TensorData<S> augment_image(const TensorData<S>& image, Rng& rng) {
  const int c = image.shape[0], h = image.shape[1], w = image.shape[2];
  auto clampi = [](int v, int hi) { return v < 0 ? 0 : (v >= hi ? hi - 1 : v); };

  // Random crop out of 2px replicate padding.
  const int dy = static_cast<int>(rng.uniform_index(5)) - 2;
  const int dx = static_cast<int>(rng.uniform_index(5)) - 2;
  const bool flip = rng.bernoulli(0.5);
  const double angle = rng.uniform(-10.0, 10.0) * (3.14159265358979323846 / 180.0);
  const double cs = std::cos(angle), sn = std::sin(angle);
  const double cy = (h - 1) / 2.0, cx = (w - 1) / 2.0;

  TensorData<S> out(image.shape);
  for (int ch = 0; ch < c; ++ch) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        // Inverse rotation first (output -> source), then flip, then crop.
        const double ry = y - cy, rx = x - cx;
        int sy = static_cast<int>(std::lround(cy - sn * rx + cs * ry));
        int sx = static_cast<int>(std::lround(cx + cs * rx + sn * ry));
        if (flip) sx = w - 1 - sx;
        sy = clampi(sy + dy, h);
        sx = clampi(sx + dx, w);
        out.at(ch, y, x) = image.at(ch, sy, sx);
      }
    }
  }
  return out;
}

template <typename S>
std::vector<TrainItem<S>> assemble_batch(const synth::Dataset& dataset,
                                         std::span<const int> indices,
                                         int epoch, std::uint64_t seed,
                                         bool augment) {
  std::vector<TrainItem<S>> items(indices.size());
  parallel_for(indices.size(), [&](std::size_t slot) {
    const int ds_index = indices[slot];
    const synth::ImageSample& sample =
        dataset.train[static_cast<std::size_t>(ds_index)];
    TrainItem<S>& item = items[slot];
    item.seed = derive_seed(seed, static_cast<std::uint64_t>(epoch),
                            static_cast<std::uint64_t>(ds_index));

    TensorData<S> image = sample.image.template cast<S>();
    if (augment) {
      Rng aug_rng(derive_seed(item.seed, 1));
      image = augment_image(image, aug_rng);
    }
    item.image = std::move(image);

    Rng cap_rng(derive_seed(item.seed, 2));
    const auto& text =
        sample.captions[cap_rng.uniform_index(sample.captions.size())];
    item.pos_ids = encode_caption(text, dataset.vocab).ids;

    Rng neg_rng(derive_seed(item.seed, 3));
    const auto pick = synth::sample_negative(sample.spec, dataset.train, neg_rng);
    const auto& neg_sample = dataset.train[static_cast<std::size_t>(pick.index)];
    const auto& neg_text =
        neg_sample.captions[neg_rng.uniform_index(neg_sample.captions.size())];
    item.neg_ids = encode_caption(neg_text, dataset.vocab).ids;
  });
  return items;
}

// ---------------------------------------------------------------------------
// Trainer
// ---------------------------------------------------------------------------

namespace {

/// -log(d) for target 1, -log(1-d) for target 0, clamped away from 0.
template <typename S>
ad::Tensor<S> bce(ad::Tensor<S> d, bool target_real) {
  constexpr double eps = 1e-7;
  auto p = target_real ? d : ad::add_scalar(ad::neg(d), 1.0);
  return ad::neg(ad::log(ad::clamp(p, eps, 1.0)));
}

}  // namespace

template <typename S>
typename Trainer<S>::FlatGroup Trainer<S>::make_group(
    std::vector<Parameter<S>*> params) {
  FlatGroup g;
  g.params = std::move(params);
  for (Parameter<S>* p : g.params) {
    g.offset[p] = g.total;
    g.total += p->value.numel();
  }
  return g;
}

template <typename S>
Trainer<S>::Trainer(TaganModel<S>& model, const TrainSettings& settings)
    : model_(&model),
      settings_(settings),
      gen_group_(make_group(model.generator_group())),
      disc_group_(make_group(model.discriminator_group())),
      gen_opt_(model.generator_group(), settings.beta1, settings.beta2,
               settings.adam_eps),
      disc_opt_(model.discriminator_group(), settings.beta1, settings.beta2,
                settings.adam_eps) {}

template <typename S>
typename Trainer<S>::DTerms Trainer<S>::discriminator_terms(
    ad::Graph<S>& graph, const TrainItem<S>& item) const {
  auto disc = model_->discriminator.bind(graph, /*frozen=*/false);
  auto gen = model_->generator.bind(graph, /*frozen=*/true);
  auto x = graph.constant(item.image);

  auto pyr_real = disc.pyramid(x);
  DTerms terms;
  terms.real_uncond = bce(disc.unconditional_score(pyr_real), true);
  auto text_pos = disc.text_features(item.pos_ids);
  auto text_neg = disc.text_features(item.neg_ids);
  terms.real_cond = bce(disc.conditional_score_from(text_pos, pyr_real).d, true);
  terms.mismatch = bce(disc.conditional_score_from(text_neg, pyr_real).d, false);

  // Fake images come from the frozen generator, so the generator subgraph
  // carries no gradient; only the unconditional branch scores fakes.
  Rng fake_rng(derive_seed(item.seed, 4));
  auto fake = gen.generate(x, item.neg_ids, fake_rng).image;
  terms.fake_uncond = bce(disc.unconditional_score(disc.pyramid(fake)), false);
  return terms;
}

template <typename S>
typename Trainer<S>::GTerms Trainer<S>::generator_terms(
    ad::Graph<S>& graph, const TrainItem<S>& item) const {
  auto disc = model_->discriminator.bind(graph, /*frozen=*/true);
  auto gen = model_->generator.bind(graph, /*frozen=*/false);
  auto x = graph.constant(item.image);

  GTerms terms;
  Rng adv_rng(derive_seed(item.seed, 5));
  auto fake = gen.generate(x, item.neg_ids, adv_rng);
  auto pyr_fake = disc.pyramid(fake.image);
  if (settings_.literal_g_real_term) {
    // Literal objective form: the unconditional term scores the real image
    // and therefore carries no generator gradient.
    terms.adv_uncond = bce(disc.unconditional_score(disc.pyramid(x)), true);
  } else {
    terms.adv_uncond = bce(disc.unconditional_score(pyr_fake), true);
  }
  terms.adv_cond = bce(
      disc.conditional_score_from(disc.text_features(item.neg_ids), pyr_fake).d,
      true);

  Rng rec_rng(derive_seed(item.seed, 6));
  auto recon = gen.generate(x, item.pos_ids, rec_rng);
  terms.rec = reconstruction_loss(x, recon.image);
  terms.kl = ad::add(fake.cond.kl, recon.cond.kl);
  return terms;
}

template <typename S>
ad::Tensor<S> Trainer<S>::total_d_loss(const DTerms& t) const {
  auto cond = ad::mul_scalar(ad::add(t.real_cond, t.mismatch), settings_.lambda1);
  return ad::add(ad::add(t.real_uncond, cond), t.fake_uncond);
}

template <typename S>
ad::Tensor<S> Trainer<S>::total_g_loss(const GTerms& t) const {
  auto total = ad::add(t.adv_uncond, ad::mul_scalar(t.adv_cond, settings_.lambda1));
  total = ad::add(total, ad::mul_scalar(t.rec, settings_.lambda2));
  return ad::add(total, ad::mul_scalar(t.kl, settings_.kl_weight));
}

template <typename S>
template <typename TermFn>
void Trainer<S>::run_step(std::span<const TrainItem<S>> items,
                          const FlatGroup& group, AdamOptimizer<S>& opt,
                          double lr, const TermFn& fn) {
  const std::size_t n = items.size();
  if (n == 0) throw ContractError("training step on an empty batch");

  std::vector<std::vector<S>> flat(n);
  parallel_for(n, [&](std::size_t i) {
    ad::Graph<S> graph;
    ad::Tensor<S> total = fn(graph, items[i], i);
    if (!std::isfinite(static_cast<double>(total.item()))) {
      throw NumericError("non-finite loss at batch element " + std::to_string(i));
    }
    graph.backward(total);
    auto& dst = flat[i];
    dst.assign(group.total, S(0));
    graph.visit_param_grads([&](Parameter<S>* p, const std::vector<S>& grad) {
      auto it = group.offset.find(p);
      if (it == group.offset.end()) return;
      S* base = dst.data() + it->second;
      for (std::size_t j = 0; j < grad.size(); ++j) base[j] += grad[j];
    });
  });

  // Deterministic reduction in sample order, independent of thread count.
  std::vector<S> sum(group.total, S(0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < group.total; ++j) sum[j] += flat[i][j];
  }
  const S inv = S(1) / static_cast<S>(n);
  model_->store.zero_grad();
  for (Parameter<S>* p : group.params) {
    const S* src = sum.data() + group.offset.at(p);
    for (std::size_t j = 0; j < p->grad.numel(); ++j) {
      p->grad.data[j] = src[j] * inv;
    }
  }
  opt.step(lr);
}

template <typename S>
LossReport Trainer<S>::discriminator_step(std::span<const TrainItem<S>> items,
                                          double lr) {
  const std::size_t n = items.size();
  std::vector<std::array<double, 4>> comps(n);
  run_step(items, disc_group_, disc_opt_, lr,
           [&](ad::Graph<S>& graph, const TrainItem<S>& item, std::size_t i) {
             DTerms t = discriminator_terms(graph, item);
             comps[i] = {static_cast<double>(t.real_uncond.item()),
                         static_cast<double>(t.real_cond.item()),
                         static_cast<double>(t.mismatch.item()),
                         static_cast<double>(t.fake_uncond.item())};
             return total_d_loss(t);
           });

  LossReport rep;
  rep.lr = lr;
  for (std::size_t i = 0; i < n; ++i) {
    rep.d_real_uncond += comps[i][0];
    rep.d_real_cond += comps[i][1];
    rep.d_mismatch += comps[i][2];
    rep.d_fake += comps[i][3];
  }
  rep.d_real_uncond /= static_cast<double>(n);
  rep.d_real_cond /= static_cast<double>(n);
  rep.d_mismatch /= static_cast<double>(n);
  rep.d_fake /= static_cast<double>(n);
  rep.d_total = rep.d_real_uncond +
                settings_.lambda1 * (rep.d_real_cond + rep.d_mismatch) +
                rep.d_fake;
  return rep;
}

template <typename S>
LossReport Trainer<S>::generator_step(std::span<const TrainItem<S>> items,
                                      double lr) {
  const std::size_t n = items.size();
  std::vector<std::array<double, 4>> comps(n);
  run_step(items, gen_group_, gen_opt_, lr,
           [&](ad::Graph<S>& graph, const TrainItem<S>& item, std::size_t i) {
             GTerms t = generator_terms(graph, item);
             comps[i] = {static_cast<double>(t.adv_uncond.item()),
                         static_cast<double>(t.adv_cond.item()),
                         static_cast<double>(t.rec.item()),
                         static_cast<double>(t.kl.item())};
             return total_g_loss(t);
           });

  LossReport rep;
  rep.lr = lr;
  for (std::size_t i = 0; i < n; ++i) {
    rep.g_adv_uncond += comps[i][0];
    rep.g_adv_cond += comps[i][1];
    rep.g_rec += comps[i][2];
    rep.g_kl += comps[i][3];
  }
  rep.g_adv_uncond /= static_cast<double>(n);
  rep.g_adv_cond /= static_cast<double>(n);
  rep.g_rec /= static_cast<double>(n);
  rep.g_kl /= static_cast<double>(n);
  rep.g_total = rep.g_adv_uncond + settings_.lambda1 * rep.g_adv_cond +
                settings_.lambda2 * rep.g_rec + settings_.kl_weight * rep.g_kl;
  return rep;
}

// ---------------------------------------------------------------------------
// Full run
// ---------------------------------------------------------------------------

namespace {

std::string checkpoint_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt-%04d.ckpt", epoch);
  return buf;
}

void save_run_checkpoint(const RunConfig& cfg, TaganModel<float>& model,
                         Trainer<float>& trainer, int next_epoch, int step,
                         const std::string& path) {
  Checkpoint ckpt;
  ckpt.config_digest = cfg.digest();
  model.append_params(ckpt);
  trainer.generator_optimizer().append_state(ckpt, "opt/gen/");
  trainer.discriminator_optimizer().append_state(ckpt, "opt/disc/");
  ckpt.add("opt/progress",
           TensorData<double>({2}, {static_cast<double>(next_epoch),
                                    static_cast<double>(step)}));
  ckpt.save(path);
}

}  // namespace

TrainRunResult run_training(const RunConfig& cfg, bool resume, bool force,
                            std::ostream* console) {
  cfg.validate();
  synth::Dataset dataset = synth::load_dataset(cfg.dataset);
  if (dataset.train.empty()) {
    throw ContractError("dataset at " + cfg.dataset + " has no training split");
  }

  std::error_code ec;
  fs::create_directories(cfg.out, ec);
  if (!fs::exists(cfg.out)) throw IoError("cannot create output dir: " + cfg.out);

  const ModelConfig model_cfg =
      ModelConfig::from_run_config(cfg, dataset.vocab.size());
  TaganModel<float> model =
      TaganModel<float>::create(model_cfg, derive_seed(cfg.seed, 0x1217));
  TrainSettings settings = TrainSettings::from_run_config(cfg);
  Trainer<float> trainer(model, settings);

  int start_epoch = 0;
  int step = 0;
  const std::string latest = cfg.out + "/ckpt-latest.ckpt";
  if (resume && fs::exists(latest)) {
    Checkpoint ckpt = Checkpoint::load(latest);
    if (ckpt.config_digest != cfg.digest() && !force) {
      throw ConfigError(
          "checkpoint " + latest +
          " was written under a different config (digest mismatch); pass "
          "--force to load anyway");
    }
    model.load_params(ckpt);
    trainer.generator_optimizer().load_state(ckpt, "opt/gen/");
    trainer.discriminator_optimizer().load_state(ckpt, "opt/disc/");
    const auto progress = ckpt.get<double>("opt/progress");
    start_epoch = static_cast<int>(progress.data[0]);
    step = static_cast<int>(progress.data[1]);
  }

  cfg.save(cfg.out + "/config.txt");
  dataset.vocab.save(cfg.out + "/vocab.txt");

  std::ofstream loss_log(cfg.out + "/loss_log.txt",
                         resume && start_epoch > 0
                             ? std::ios::app
                             : std::ios::trunc);
  if (!loss_log) throw IoError("cannot write loss log in " + cfg.out);

  std::vector<int> order(dataset.train.size());
  TrainRunResult result;
  result.final_epoch = start_epoch;

  for (int epoch = start_epoch; epoch < settings.epochs; ++epoch) {
    const double lr = settings.lr_at(epoch);

    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng shuffle_rng(derive_seed(cfg.seed, 0x0e0e, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);
    }

    for (std::size_t begin = 0; begin < order.size();
         begin += static_cast<std::size_t>(settings.batch)) {
      const std::size_t end =
          std::min(order.size(), begin + static_cast<std::size_t>(settings.batch));
      auto items = assemble_batch<float>(
          dataset, std::span<const int>(order.data() + begin, end - begin),
          epoch, cfg.seed, /*augment=*/true);

      LossReport d_rep = trainer.discriminator_step(items, lr);
      LossReport g_rep = trainer.generator_step(items, lr);

      LossReport rep = d_rep;
      rep.g_total = g_rep.g_total;
      rep.g_adv_uncond = g_rep.g_adv_uncond;
      rep.g_adv_cond = g_rep.g_adv_cond;
      rep.g_rec = g_rep.g_rec;
      rep.g_kl = g_rep.g_kl;
      rep.step = ++step;
      rep.epoch = epoch;
      rep.lr = lr;
      loss_log << rep.log_line() << '\n';
      ++result.steps_run;
    }
    loss_log.flush();
    result.final_epoch = epoch + 1;

    const bool last = epoch + 1 == settings.epochs;
    if (last || (epoch + 1) % settings.checkpoint_interval == 0) {
      const std::string name = cfg.out + "/" + checkpoint_name(epoch + 1);
      save_run_checkpoint(cfg, model, trainer, epoch + 1, step, name);
      save_run_checkpoint(cfg, model, trainer, epoch + 1, step, latest);
      result.final_checkpoint = name;
      if (console) {
        (*console) << "epoch " << (epoch + 1) << "/" << settings.epochs
                   << " lr=" << lr << " checkpoint=" << name << '\n';
      }
    }
  }

  if (result.final_checkpoint.empty()) {
    // Zero-epoch runs (or a resume at completion) still leave a loadable
    // final state behind.
    result.final_checkpoint = latest;
    if (!fs::exists(latest)) {
      save_run_checkpoint(cfg, model, trainer, settings.epochs, step, latest);
    }
  }
  return result;
}

#define TAGAN_INSTANTIATE_TRAIN(S)                                           \
  template struct TrainItem<S>;                                              \
  template class Trainer<S>;                                                 \
  template TensorData<S> augment_image(const TensorData<S>&, Rng&);          \
  template std::vector<TrainItem<S>> assemble_batch(                         \
      const synth::Dataset&, std::span<const int>, int, std::uint64_t, bool);

TAGAN_INSTANTIATE_TRAIN(float)
TAGAN_INSTANTIATE_TRAIN(double)

#undef TAGAN_INSTANTIATE_TRAIN

}  // namespace tagan
