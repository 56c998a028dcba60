// SPDX-License-Identifier: Apache-2.0
#include "tagan/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

#include "tagan/threading.hpp"

namespace tagan::eval {

std::string EvalReport::to_text() const {
  std::ostringstream os;
  os << "manipulation_accuracy = " << manipulation_accuracy << '\n'
     << "background_l2_rms = " << background_l2_rms << '\n'
     << "background_l2_mse = " << background_l2_mse << '\n'
     << "positive_text_l2_rms = " << positive_text_l2_rms << '\n'
     << "positive_text_l2_mse = " << positive_text_l2_mse << '\n'
     << "top1_acc = " << top1_acc << '\n'
     << "ap_at_k = " << ap_at_k << '\n'
     << "retrieval_k = " << retrieval_k << '\n'
     << "n_samples = " << n_samples << '\n';
  return os.str();
}

std::string EvalReport::to_json() const {
  nlohmann::json j{{"manipulation_accuracy", manipulation_accuracy},
                   {"background_l2_rms", background_l2_rms},
                   {"background_l2_mse", background_l2_mse},
                   {"positive_text_l2_rms", positive_text_l2_rms},
                   {"positive_text_l2_mse", positive_text_l2_mse},
                   {"top1_acc", top1_acc},
                   {"ap_at_k", ap_at_k},
                   {"retrieval_k", retrieval_k},
                   {"n_samples", n_samples}};
  return j.dump(2);
}

void EvalReport::save(const std::string& txt_path,
                      const std::string& json_path) const {
  std::ofstream txt(txt_path, std::ios::trunc);
  if (!txt) throw IoError("cannot write report: " + txt_path);
  txt << to_text();
  std::ofstream js(json_path, std::ios::trunc);
  if (!js) throw IoError("cannot write report: " + json_path);
  js << to_json() << '\n';
}

// ---------------------------------------------------------------------------
// Manipulation
// ---------------------------------------------------------------------------

namespace {

/// Squared error in [0,1] pixel scale accumulated over a pixel set.
void accumulate_region_error(const TensorF& a, const TensorF& b,
                             const std::vector<std::uint8_t>& region,
                             bool inside, double& sq_sum, std::size_t& count) {
  const int side = a.shape[1];
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const bool in = region[static_cast<std::size_t>(y) * side + x] != 0;
      if (in != inside) continue;
      for (int c = 0; c < 3; ++c) {
        const double d = (static_cast<double>(a.at(c, y, x)) -
                          static_cast<double>(b.at(c, y, x))) *
                         0.5;  // [-1,1] -> [0,1] scale
        sq_sum += d * d;
        ++count;
      }
    }
  }
}

}  // namespace

ManipulationResult manipulation_eval(const std::vector<synth::ImageSample>& test,
                                     const EditFn& edit, std::uint64_t seed,
                                     EditKind kind) {
  if (test.empty()) throw ContractError("manipulation_eval: empty test set");
  const int n_colors = static_cast<int>(synth::object_palette().size());

  struct Slot {
    bool hit = false;
    double sq_sum = 0;
    std::size_t count = 0;
  };
  std::vector<Slot> slots(test.size());

  parallel_for(test.size(), [&](std::size_t i) {
    const synth::ImageSample& sample = test[i];
    const std::uint64_t sample_seed = derive_seed(seed, 0xeda7, i);
    Rng rng(sample_seed);

    synth::AttributeSpec target = sample.spec;
    if (kind == EditKind::border_color) {
      if (!sample.spec.bordered()) {
        throw ContractError("border edit requested on a border-free dataset");
      }
      int choice;
      do {
        choice = static_cast<int>(rng.uniform_index(n_colors));
      } while (choice == sample.spec.border_color ||
               choice == sample.spec.object_color);
      target.border_color = choice;
    } else {
      int choice;
      do {
        choice = static_cast<int>(rng.uniform_index(n_colors));
      } while (choice == sample.spec.object_color);
      target.object_color = choice;
      if (sample.spec.bordered() && target.border_color == choice) {
        // Keep the spec valid: border must differ from the new fill.
        target.border_color = sample.spec.object_color;
      }
    }
    const std::string caption = synth::caption_for(target, 0);
    const TensorF edited = edit(sample, caption, sample_seed);

    Slot& slot = slots[i];
    if (kind == EditKind::border_color) {
      const auto ring = synth::border_ring(sample.mask, synth::kCanvas);
      const auto fill = synth::erode_mask(sample.mask, synth::kCanvas, 2);
      const int ring_color =
          synth::probe_region_color(edited, ring, synth::object_palette());
      const int fill_color =
          synth::probe_region_color(edited, fill, synth::object_palette());
      slot.hit = ring_color == target.border_color &&
                 fill_color == sample.spec.object_color;
    } else {
      const int probed =
          synth::probe_region_color(edited, sample.mask, synth::object_palette());
      slot.hit = probed == target.object_color;
    }
    accumulate_region_error(sample.image, edited, sample.mask, /*inside=*/false,
                            slot.sq_sum, slot.count);
  });

  ManipulationResult out;
  out.n = static_cast<int>(test.size());
  double sq = 0;
  std::size_t count = 0;
  int hits = 0;
  for (const Slot& s : slots) {
    hits += s.hit ? 1 : 0;
    sq += s.sq_sum;
    count += s.count;
  }
  out.accuracy = static_cast<double>(hits) / static_cast<double>(test.size());
  out.background_mse = count ? sq / static_cast<double>(count) : 0.0;
  out.background_rms = std::sqrt(out.background_mse);
  return out;
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

ReconstructionResult reconstruction_eval(
    const std::vector<synth::ImageSample>& test, const EditFn& generate,
    int trials, std::uint64_t seed) {
  if (test.empty()) throw ContractError("reconstruction_eval: empty test set");
  if (trials < 1) throw ContractError("reconstruction_eval: trials must be >= 1");

  std::vector<double> mse_slots(test.size(), 0.0);
  parallel_for(test.size(), [&](std::size_t i) {
    const synth::ImageSample& sample = test[i];
    const std::string& caption = sample.captions.front();
    double acc = 0;
    for (int r = 0; r < trials; ++r) {
      const std::uint64_t trial_seed =
          derive_seed(seed, 0x4ec0, i, static_cast<std::uint64_t>(r));
      const TensorF y = generate(sample, caption, trial_seed);
      double sq = 0;
      for (std::size_t p = 0; p < y.numel(); ++p) {
        const double d = (static_cast<double>(sample.image.data[p]) -
                          static_cast<double>(y.data[p])) *
                         0.5;
        sq += d * d;
      }
      acc += sq / static_cast<double>(y.numel());
    }
    mse_slots[i] = acc / static_cast<double>(trials);
  });

  ReconstructionResult out;
  out.n = static_cast<int>(test.size());
  out.trials = trials;
  out.mse = std::accumulate(mse_slots.begin(), mse_slots.end(), 0.0) /
            static_cast<double>(test.size());
  out.rms = std::sqrt(out.mse);
  return out;
}

// ---------------------------------------------------------------------------
// Retrieval
// ---------------------------------------------------------------------------

std::string retrieval_caption(const synth::ImageSample& sample) {
  return synth::caption_for(sample.spec, 1);
}

bool retrieval_match(const synth::AttributeSpec& image_spec,
                     const synth::AttributeSpec& caption_spec) {
  return image_spec.shape == caption_spec.shape &&
         image_spec.object_color == caption_spec.object_color &&
         image_spec.border_color == caption_spec.border_color;
}

RetrievalResult retrieval_eval(const std::vector<synth::ImageSample>& corpus,
                               int k, const PairScoreFn& score) {
  const int n = static_cast<int>(corpus.size());
  if (n < 2) throw ContractError("retrieval_eval: corpus too small");
  if (k < 1 || k > n) {
    throw ContractError("retrieval_eval: K=" + std::to_string(k) +
                        " needs a corpus of at least K images, have " +
                        std::to_string(n));
  }

  // Score matrix, computed in parallel over images.
  std::vector<double> scores(static_cast<std::size_t>(n) * n);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    for (int j = 0; j < n; ++j) {
      scores[i * n + j] = score(static_cast<int>(i), j);
    }
  });

  auto match = [&](int image, int caption) {
    return retrieval_match(corpus[static_cast<std::size_t>(image)].spec,
                           corpus[static_cast<std::size_t>(caption)].spec);
  };

  int top1_hits = 0;
  for (int i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < n; ++j) {
      if (scores[static_cast<std::size_t>(i) * n + j] >
          scores[static_cast<std::size_t>(i) * n + best]) {
        best = j;
      }
    }
    top1_hits += match(i, best) ? 1 : 0;
  }

  double ap_sum = 0;
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return scores[static_cast<std::size_t>(a) * n + j] >
             scores[static_cast<std::size_t>(b) * n + j];
    });
    int matching = 0;
    for (int r = 0; r < k; ++r) {
      matching += match(order[static_cast<std::size_t>(r)], j) ? 1 : 0;
    }
    ap_sum += static_cast<double>(matching) / static_cast<double>(k);
  }

  RetrievalResult out;
  out.k = k;
  out.n_captions = n;
  out.top1_acc = static_cast<double>(top1_hits) / static_cast<double>(n);
  out.ap_at_k = ap_sum / static_cast<double>(n);
  return out;
}

// ---------------------------------------------------------------------------
// Strips
// ---------------------------------------------------------------------------

RgbImage make_strip(const std::vector<TensorF>& frames) {
  if (frames.empty()) throw ContractError("make_strip: no frames");
  const int side = frames.front().shape[1];
  RgbImage strip;
  strip.height = side;
  strip.width = side * static_cast<int>(frames.size());
  strip.pixels.assign(static_cast<std::size_t>(3) * strip.width * strip.height, 0);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const RgbImage tile = tensor_to_rgb(frames[f]);
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        for (int c = 0; c < 3; ++c) {
          strip.pixels[(static_cast<std::size_t>(y) * strip.width +
                        f * side + x) *
                           3 +
                       c] = tile.pixels[(static_cast<std::size_t>(y) * side + x) * 3 + c];
        }
      }
    }
  }
  return strip;
}

double frame_mad(const TensorF& a, const TensorF& b) {
  if (a.shape != b.shape) throw DimensionError("frame_mad: shape mismatch");
  double acc = 0;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    acc += std::abs(static_cast<double>(a.data[i]) -
                    static_cast<double>(b.data[i])) *
           0.5;
  }
  return acc / static_cast<double>(a.numel());
}

// ---------------------------------------------------------------------------
// Model adapters
// ---------------------------------------------------------------------------

EditFn make_model_edit_fn(TaganModel<float>& model, const Vocabulary& vocab) {
  return [&model, &vocab](const synth::ImageSample& sample,
                          const std::string& caption,
                          std::uint64_t seed) -> TensorF {
    const Caption ids = encode_caption(caption, vocab, /*allow_unknown=*/true);
    ad::Graph<float> graph;
    auto gen = model.generator.bind(graph, /*frozen=*/true);
    Rng rng(seed);
    auto out = gen.generate(graph.constant(sample.image), ids.ids, rng);
    return TensorF(out.image.shape(), out.image.value());
  };
}

PairScoreFn make_model_scorer(TaganModel<float>& model, const Vocabulary& vocab,
                              const std::vector<synth::ImageSample>& corpus) {
  auto text_caches = std::make_shared<std::vector<TextScoreCache>>(corpus.size());
  auto image_caches =
      std::make_shared<std::vector<ImageScoreCache>>(corpus.size());
  parallel_for(corpus.size(), [&](std::size_t i) {
    const Caption ids = encode_caption(retrieval_caption(corpus[i]), vocab);
    (*text_caches)[i] = build_text_cache(model.discriminator, ids.ids);
    (*image_caches)[i] = build_image_cache(model.discriminator, corpus[i].image);
  });
  const double eps = model.discriminator.cfg.clamp_eps;
  return [text_caches, image_caches, eps](int image_index, int caption_index) {
    return score_cached((*text_caches)[static_cast<std::size_t>(caption_index)],
                        (*image_caches)[static_cast<std::size_t>(image_index)],
                        eps);
  };
}

}  // namespace tagan::eval
