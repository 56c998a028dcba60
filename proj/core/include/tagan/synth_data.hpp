// SPDX-License-Identifier: Apache-2.0
//
// Procedural benchmark data: colored shapes on colored backgrounds with
// templated captions, exact object masks and deterministic generation.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "tagan/rng.hpp"
#include "tagan/tensor.hpp"
#include "tagan/vocab.hpp"

namespace tagan::synth {

inline constexpr int kCanvas = 32;

enum class ShapeKind { square = 0, circle = 1, triangle = 2 };

struct PaletteColor {
  const char* name;
  std::uint8_t r, g, b;
};

/// Object colors are maximally separated in RGB so the color probe is
/// unambiguous; backgrounds are disjoint from the object palette.
const std::vector<PaletteColor>& object_palette();
const std::vector<PaletteColor>& background_palette();
const std::vector<std::string>& shape_names();

struct AttributeSpec {
  ShapeKind shape = ShapeKind::square;
  int object_color = 0;      // index into object_palette()
  int background_color = 0;  // index into background_palette()
  int border_color = -1;     // index into object_palette(); -1 = no border
  int jitter_x = 0;
  int jitter_y = 0;
  int size = 6;  // radius in pixels

  bool bordered() const { return border_color >= 0; }
  int center_x() const { return kCanvas / 2 + jitter_x; }
  int center_y() const { return kCanvas / 2 + jitter_y; }
  /// Same (shape, colors, border); ignores jitter and size.
  bool same_combo(const AttributeSpec& o) const {
    return shape == o.shape && object_color == o.object_color &&
           background_color == o.background_color && border_color == o.border_color;
  }
  void validate() const;
};

struct ImageSample {
  AttributeSpec spec;
  TensorF image;                    // [3, 32, 32] in [-1, 1]
  std::vector<std::uint8_t> mask;   // 32*32, 1 = object pixel
  std::vector<std::string> captions;  // two templated positives
};

/// Deterministic rasterization with hard edges; the mask covers exactly the
/// rendered object pixels. Captions are not filled in here.
ImageSample render(const AttributeSpec& spec);

/// 4-neighborhood binary erosion, iterated `rounds` times.
std::vector<std::uint8_t> erode_mask(const std::vector<std::uint8_t>& mask,
                                     int side, int rounds);

/// The border ring a bordered render paints: mask minus its 2-step erosion.
std::vector<std::uint8_t> border_ring(const std::vector<std::uint8_t>& mask,
                                      int side);

int caption_template_count(bool bordered);

/// Fill caption template `index` from the spec. Template 0 names the
/// background; template 1 names object attributes only.
std::string caption_for(const AttributeSpec& spec, int template_index);

/// The closed vocabulary covering every template and attribute name.
Vocabulary build_vocabulary();

struct NegativePick {
  int index = -1;  // sample index within the pool
  bool differs_shape = false;
  bool differs_color = false;
  bool differs_background = false;
  bool differs_border = false;
};

/// Index of a sample whose spec differs from `spec` in at least one
/// attribute, drawn uniformly from the pool; records what differs.
NegativePick sample_negative(const AttributeSpec& spec,
                             const std::vector<ImageSample>& pool, Rng& rng);

struct DatasetConfig {
  int n_train = 2000;
  int n_test = 200;
  std::uint64_t seed = 1;
  bool bordered = false;
};

struct Dataset {
  DatasetConfig cfg;
  std::vector<ImageSample> train;
  std::vector<ImageSample> test;
  Vocabulary vocab;
  /// Attribute combinations absent from training but present in test.
  std::vector<AttributeSpec> held_out_combos;
};

/// Stratified over the attribute grid; at least 10% of combinations are
/// held out of training and placed first in the test rotation.
Dataset build_dataset(const DatasetConfig& cfg);

void save_dataset(const Dataset& dataset, const std::string& dir);
Dataset load_dataset(const std::string& dir);

/// Hex SHA-256 of the manifest file in `dir`.
std::string manifest_hash(const std::string& dir);

/// Mean color inside `region` (1 bytes) against a palette; returns the
/// nearest palette index by squared RGB distance.
int probe_region_color(const TensorF& image, const std::vector<std::uint8_t>& region,
                       const std::vector<PaletteColor>& palette);

}  // namespace tagan::synth
