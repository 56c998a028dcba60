// SPDX-License-Identifier: Apache-2.0
//
// Desk-scale measurements: manipulation accuracy + background preservation
// via the dataset's exact masks and color probe, reconstruction error with
// repeated conditioning draws, retrieval metrics over the conditional score,
// and interpolation strips. The harness takes callbacks so oracle baselines
// (identity, perfect recolorer, random scorer) validate it before any model
// is scored.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "tagan/image_io.hpp"
#include "tagan/model.hpp"
#include "tagan/synth_data.hpp"

namespace tagan::eval {

struct EvalReport {
  double manipulation_accuracy = 0;
  double background_l2_rms = 0;
  double background_l2_mse = 0;
  double positive_text_l2_rms = 0;
  double positive_text_l2_mse = 0;
  double top1_acc = 0;
  double ap_at_k = 0;
  int retrieval_k = 0;
  int n_samples = 0;

  std::string to_text() const;
  std::string to_json() const;
  void save(const std::string& txt_path, const std::string& json_path) const;
};

/// Produce an edited image for (sample, target caption); the seed is the
/// sample's deterministic stream.
using EditFn = std::function<TensorF(const synth::ImageSample&,
                                     const std::string& caption,
                                     std::uint64_t seed)>;

/// Score one (image index, caption index) pair; higher = better match.
using PairScoreFn = std::function<double(int image_index, int caption_index)>;

enum class EditKind { object_color, border_color };

struct ManipulationResult {
  double accuracy = 0;
  double background_rms = 0;
  double background_mse = 0;
  int n = 0;
};

/// For every test sample, build a target caption naming a different object
/// (or border) color with all other attributes unchanged, apply the edit,
/// probe the edited region against the palette and measure the RMS error
/// outside the object mask (in [0,1] pixel scale).
ManipulationResult manipulation_eval(const std::vector<synth::ImageSample>& test,
                                     const EditFn& edit, std::uint64_t seed,
                                     EditKind kind = EditKind::object_color);

struct ReconstructionResult {
  double rms = 0;
  double mse = 0;
  int n = 0;
  int trials = 0;
};

/// Mean per-pixel L2 between x and G(x, t) with the positive text, averaged
/// over `trials` conditioning draws per sample.
ReconstructionResult reconstruction_eval(
    const std::vector<synth::ImageSample>& test, const EditFn& generate,
    int trials, std::uint64_t seed);

struct RetrievalResult {
  double top1_acc = 0;
  double ap_at_k = 0;
  int k = 0;
  int n_captions = 0;
};

/// One object-description caption per test image; a pair matches when the
/// caption's object attributes (color, shape, border when present) agree
/// with the image's. Top-1 ranks captions per image; AP@K ranks images per
/// caption and reports the matching fraction of the top K.
RetrievalResult retrieval_eval(const std::vector<synth::ImageSample>& corpus,
                               int k, const PairScoreFn& score);

/// The caption used for retrieval (object attributes only, template 1).
std::string retrieval_caption(const synth::ImageSample& sample);
/// Whether image and caption-source specs agree on the object attributes.
bool retrieval_match(const synth::AttributeSpec& image_spec,
                     const synth::AttributeSpec& caption_spec);

/// Horizontal strip of frames (each [3,s,s] in [-1,1]).
RgbImage make_strip(const std::vector<TensorF>& frames);

/// Mean absolute difference between two frames in [0,1] pixel scale.
double frame_mad(const TensorF& a, const TensorF& b);

// ---------------------------------------------------------------------------
// Model adapters
// ---------------------------------------------------------------------------

/// Generator-backed EditFn: tokenizes the caption with `vocab`, samples the
/// conditioning with the given seed and decodes.
EditFn make_model_edit_fn(TaganModel<float>& model, const Vocabulary& vocab);

/// Discriminator-backed pair scorer over cached text/image parts.
PairScoreFn make_model_scorer(TaganModel<float>& model, const Vocabulary& vocab,
                              const std::vector<synth::ImageSample>& corpus);

}  // namespace tagan::eval
