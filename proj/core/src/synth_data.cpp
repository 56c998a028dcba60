// SPDX-License-Identifier: Apache-2.0
#include "tagan/synth_data.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "tagan/image_io.hpp"
#include "tagan/sha256.hpp"

namespace tagan::synth {

namespace fs = std::filesystem;

const std::vector<PaletteColor>& object_palette() {
  static const std::vector<PaletteColor> palette = {
      {"red", 255, 0, 0},
      {"green", 0, 255, 0},
      {"blue", 0, 0, 255},
      {"yellow", 255, 255, 0},
  };
  return palette;
}

const std::vector<PaletteColor>& background_palette() {
  static const std::vector<PaletteColor> palette = {
      {"white", 255, 255, 255},
      {"black", 0, 0, 0},
      {"gray", 128, 128, 128},
      {"purple", 128, 0, 128},
  };
  return palette;
}

const std::vector<std::string>& shape_names() {
  static const std::vector<std::string> names = {"square", "circle", "triangle"};
  return names;
}

void AttributeSpec::validate() const {
  if (object_color < 0 ||
      object_color >= static_cast<int>(object_palette().size())) {
    throw ContractError("invalid object color index");
  }
  if (background_color < 0 ||
      background_color >= static_cast<int>(background_palette().size())) {
    throw ContractError("invalid background color index");
  }
  if (border_color >= static_cast<int>(object_palette().size())) {
    throw ContractError("invalid border color index");
  }
  if (bordered() && border_color == object_color) {
    throw ContractError("border color must differ from the fill color");
  }
  if (size < 3) throw ContractError("object size too small");
  const int extent = size + std::max(std::abs(jitter_x), std::abs(jitter_y));
  if (extent >= kCanvas / 2) {
    throw ContractError("object leaves the canvas after jitter");
  }
}

namespace {

bool inside_shape(const AttributeSpec& spec, int x, int y) {
  const int cx = spec.center_x(), cy = spec.center_y(), r = spec.size;
  switch (spec.shape) {
    case ShapeKind::square:
      return x >= cx - r && x < cx + r && y >= cy - r && y < cy + r;
    case ShapeKind::circle: {
      const int dx = x - cx, dy = y - cy;
      return dx * dx + dy * dy <= r * r;
    }
    case ShapeKind::triangle: {
      if (y < cy - r || y > cy + r) return false;
      return 2 * std::abs(x - cx) <= (y - (cy - r));
    }
  }
  return false;
}

float byte_to_unit_range(std::uint8_t b) {
  return static_cast<float>(b) / 255.0f * 2.0f - 1.0f;
}

void put_pixel(TensorF& image, int x, int y, const PaletteColor& color) {
  image.at(0, y, x) = byte_to_unit_range(color.r);
  image.at(1, y, x) = byte_to_unit_range(color.g);
  image.at(2, y, x) = byte_to_unit_range(color.b);
}

}  // namespace

std::vector<std::uint8_t> erode_mask(const std::vector<std::uint8_t>& mask,
                                     int side, int rounds) {
  std::vector<std::uint8_t> cur = mask;
  std::vector<std::uint8_t> next(mask.size());
  for (int round = 0; round < rounds; ++round) {
    for (int y = 0; y < side; ++y) {
      for (int x = 0; x < side; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * side + x;
        bool keep = cur[i] != 0;
        keep = keep && x > 0 && cur[i - 1] != 0;
        keep = keep && x + 1 < side && cur[i + 1] != 0;
        keep = keep && y > 0 && cur[i - side] != 0;
        keep = keep && y + 1 < side && cur[i + side] != 0;
        next[i] = keep ? 1 : 0;
      }
    }
    std::swap(cur, next);
  }
  return cur;
}

std::vector<std::uint8_t> border_ring(const std::vector<std::uint8_t>& mask,
                                      int side) {
  auto fill = erode_mask(mask, side, 2);
  std::vector<std::uint8_t> ring(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) {
    ring[i] = (mask[i] != 0 && fill[i] == 0) ? 1 : 0;
  }
  return ring;
}

ImageSample render(const AttributeSpec& spec) {
  spec.validate();
  ImageSample sample;
  sample.spec = spec;
  sample.image = TensorF({3, kCanvas, kCanvas});
  sample.mask.assign(static_cast<std::size_t>(kCanvas) * kCanvas, 0);

  const PaletteColor& bg = background_palette()[spec.background_color];
  for (int y = 0; y < kCanvas; ++y) {
    for (int x = 0; x < kCanvas; ++x) {
      if (inside_shape(spec, x, y)) {
        sample.mask[static_cast<std::size_t>(y) * kCanvas + x] = 1;
      } else {
        put_pixel(sample.image, x, y, bg);
      }
    }
  }

  const PaletteColor& fill = object_palette()[spec.object_color];
  if (spec.bordered()) {
    const PaletteColor& edge = object_palette()[spec.border_color];
    const auto ring = border_ring(sample.mask, kCanvas);
    for (int y = 0; y < kCanvas; ++y) {
      for (int x = 0; x < kCanvas; ++x) {
        const std::size_t i = static_cast<std::size_t>(y) * kCanvas + x;
        if (sample.mask[i]) put_pixel(sample.image, x, y, ring[i] ? edge : fill);
      }
    }
  } else {
    for (int y = 0; y < kCanvas; ++y) {
      for (int x = 0; x < kCanvas; ++x) {
        if (sample.mask[static_cast<std::size_t>(y) * kCanvas + x]) {
          put_pixel(sample.image, x, y, fill);
        }
      }
    }
  }
  return sample;
}

int caption_template_count(bool) { return 2; }

std::string caption_for(const AttributeSpec& spec, int template_index) {
  if (template_index < 0 || template_index >= caption_template_count(spec.bordered())) {
    throw ContractError("caption template index out of range");
  }
  const std::string& color = object_palette()[spec.object_color].name;
  const std::string& shape = shape_names()[static_cast<int>(spec.shape)];
  const std::string& bg = background_palette()[spec.background_color].name;
  std::ostringstream os;
  if (spec.bordered()) {
    const std::string& edge = object_palette()[spec.border_color].name;
    if (template_index == 0) {
      os << "a " << color << ' ' << shape << " with a " << edge
         << " border on a " << bg << " background";
    } else {
      os << "this " << shape << " is " << color << " with a " << edge
         << " border";
    }
  } else {
    if (template_index == 0) {
      os << "a " << color << ' ' << shape << " on a " << bg << " background";
    } else {
      os << "this " << shape << " is " << color;
    }
  }
  return os.str();
}

Vocabulary build_vocabulary() {
  Vocabulary v;
  for (const char* word : {"a", "this", "is", "on", "with", "background", "border"}) {
    v.add(word);
  }
  for (const auto& s : shape_names()) v.add(s);
  for (const auto& c : object_palette()) v.add(c.name);
  for (const auto& c : background_palette()) v.add(c.name);
  return v;
}

NegativePick sample_negative(const AttributeSpec& spec,
                             const std::vector<ImageSample>& pool, Rng& rng) {
  if (pool.size() < 2) {
    throw ContractError("negative sampling needs a dataset with >= 2 samples");
  }
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int idx = static_cast<int>(rng.uniform_index(pool.size()));
    const AttributeSpec& other = pool[static_cast<std::size_t>(idx)].spec;
    if (other.same_combo(spec)) continue;
    NegativePick pick;
    pick.index = idx;
    pick.differs_shape = other.shape != spec.shape;
    pick.differs_color = other.object_color != spec.object_color;
    pick.differs_background = other.background_color != spec.background_color;
    pick.differs_border = other.border_color != spec.border_color;
    return pick;
  }
  throw ContractError("degenerate dataset: every sample shares one attribute combo");
}

namespace {

std::vector<AttributeSpec> enumerate_combos(bool bordered) {
  std::vector<AttributeSpec> combos;
  const int n_obj = static_cast<int>(object_palette().size());
  const int n_bg = static_cast<int>(background_palette().size());
  for (int s = 0; s < 3; ++s) {
    for (int c = 0; c < n_obj; ++c) {
      for (int b = 0; b < n_bg; ++b) {
        if (!bordered) {
          AttributeSpec spec;
          spec.shape = static_cast<ShapeKind>(s);
          spec.object_color = c;
          spec.background_color = b;
          combos.push_back(spec);
          continue;
        }
        for (int e = 0; e < n_obj; ++e) {
          if (e == c) continue;
          AttributeSpec spec;
          spec.shape = static_cast<ShapeKind>(s);
          spec.object_color = c;
          spec.background_color = b;
          spec.border_color = e;
          combos.push_back(spec);
        }
      }
    }
  }
  return combos;
}

/// Pick `count` held-out combos while capping how often any single
/// attribute value appears, to keep the training marginals balanced.
std::vector<std::size_t> pick_held_out(const std::vector<AttributeSpec>& combos,
                                       int count, Rng& rng) {
  std::vector<std::size_t> order(combos.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_index(i)]);
  }
  const int cap_shape = (count + 2) / 3;
  const int cap_color = (count + 3) / 4;
  const int cap_bg = (count + 3) / 4;
  std::map<int, int> shape_used, color_used, bg_used;
  std::vector<std::size_t> chosen;
  for (std::size_t idx : order) {
    if (static_cast<int>(chosen.size()) >= count) break;
    const AttributeSpec& c = combos[idx];
    const int s = static_cast<int>(c.shape);
    if (shape_used[s] >= cap_shape || color_used[c.object_color] >= cap_color ||
        bg_used[c.background_color] >= cap_bg) {
      continue;
    }
    ++shape_used[s];
    ++color_used[c.object_color];
    ++bg_used[c.background_color];
    chosen.push_back(idx);
  }
  // The caps always leave room: count <= combos/3 in practice.
  if (static_cast<int>(chosen.size()) < count) {
    for (std::size_t idx : order) {
      if (static_cast<int>(chosen.size()) >= count) break;
      if (std::find(chosen.begin(), chosen.end(), idx) == chosen.end()) {
        chosen.push_back(idx);
      }
    }
  }
  return chosen;
}

AttributeSpec randomized_instance(AttributeSpec combo, Rng& rng) {
  combo.size = combo.bordered()
                   ? 6 + static_cast<int>(rng.uniform_index(5))   // 6..10
                   : 5 + static_cast<int>(rng.uniform_index(5));  // 5..9
  combo.jitter_x = static_cast<int>(rng.uniform_index(5)) - 2;    // -2..2
  combo.jitter_y = static_cast<int>(rng.uniform_index(5)) - 2;
  return combo;
}

ImageSample make_sample(const AttributeSpec& spec) {
  ImageSample sample = render(spec);
  sample.captions = {caption_for(spec, 0), caption_for(spec, 1)};
  return sample;
}

}  // namespace

Dataset build_dataset(const DatasetConfig& cfg) {
  if (cfg.n_train < 1 || cfg.n_test < 1) {
    throw ContractError("dataset sizes must be >= 1");
  }
  Dataset ds;
  ds.cfg = cfg;
  ds.vocab = build_vocabulary();

  auto combos = enumerate_combos(cfg.bordered);
  const int total = static_cast<int>(combos.size());
  const int held = (total + 9) / 10;  // ceil(0.1 * total)

  Rng pick_rng(derive_seed(cfg.seed, 0x5e1ec7));
  auto held_idx = pick_held_out(combos, held, pick_rng);
  std::vector<bool> is_held(combos.size(), false);
  for (std::size_t i : held_idx) {
    is_held[i] = true;
    ds.held_out_combos.push_back(combos[i]);
  }

  std::vector<AttributeSpec> train_combos;
  for (std::size_t i = 0; i < combos.size(); ++i) {
    if (!is_held[i]) train_combos.push_back(combos[i]);
  }
  if (cfg.n_train < static_cast<int>(train_combos.size())) {
    throw ContractError("n_train=" + std::to_string(cfg.n_train) +
                        " cannot cover " + std::to_string(train_combos.size()) +
                        " training combinations");
  }
  if (cfg.n_test < held) {
    throw ContractError("n_test=" + std::to_string(cfg.n_test) +
                        " cannot cover " + std::to_string(held) +
                        " held-out combinations");
  }

  // Test rotation: held-out combos first, then the rest.
  std::vector<AttributeSpec> test_combos = ds.held_out_combos;
  for (std::size_t i = 0; i < combos.size(); ++i) {
    if (!is_held[i]) test_combos.push_back(combos[i]);
  }

  auto shuffle = [](std::vector<AttributeSpec>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[rng.uniform_index(i)]);
    }
  };
  Rng order_rng(derive_seed(cfg.seed, 0x0bde5));
  shuffle(train_combos, order_rng);

  ds.train.reserve(static_cast<std::size_t>(cfg.n_train));
  for (int i = 0; i < cfg.n_train; ++i) {
    Rng sample_rng(derive_seed(cfg.seed, 1, static_cast<std::uint64_t>(i)));
    const auto& combo = train_combos[static_cast<std::size_t>(i) % train_combos.size()];
    ds.train.push_back(make_sample(randomized_instance(combo, sample_rng)));
  }
  ds.test.reserve(static_cast<std::size_t>(cfg.n_test));
  for (int i = 0; i < cfg.n_test; ++i) {
    Rng sample_rng(derive_seed(cfg.seed, 2, static_cast<std::uint64_t>(i)));
    const auto& combo = test_combos[static_cast<std::size_t>(i) % test_combos.size()];
    ds.test.push_back(make_sample(randomized_instance(combo, sample_rng)));
  }
  return ds;
}

// ---------------------------------------------------------------------------
// On-disk layout: manifest.tsv, vocab.txt, images/*.ppm, masks/*.pgm
// ---------------------------------------------------------------------------

namespace {

std::string sample_id(const char* split, int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s-%06d", split, i);
  return buf;
}

void write_split(const Dataset& ds, const std::vector<ImageSample>& samples,
                 const char* split, const std::string& dir, std::ostream& manifest) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const ImageSample& s = samples[i];
    const std::string id = sample_id(split, static_cast<int>(i));
    const std::string image_rel = "images/" + id + ".ppm";
    const std::string mask_rel = "masks/" + id + ".pgm";

    write_ppm(dir + "/" + image_rel, tensor_to_rgb(s.image));
    GrayImage mask;
    mask.width = kCanvas;
    mask.height = kCanvas;
    mask.pixels.resize(s.mask.size());
    for (std::size_t p = 0; p < s.mask.size(); ++p) {
      mask.pixels[p] = s.mask[p] ? 255 : 0;
    }
    write_pgm(dir + "/" + mask_rel, mask);

    const AttributeSpec& spec = s.spec;
    manifest << "id=" << id << "\tsplit=" << split
             << "\tshape=" << shape_names()[static_cast<int>(spec.shape)]
             << "\tcolor=" << object_palette()[spec.object_color].name
             << "\tbg=" << background_palette()[spec.background_color].name
             << "\tborder="
             << (spec.bordered() ? object_palette()[spec.border_color].name : "-")
             << "\tcx=" << spec.center_x() << "\tcy=" << spec.center_y()
             << "\tsize=" << spec.size << "\timage=" << image_rel
             << "\tmask=" << mask_rel;
    for (std::size_t c = 0; c < s.captions.size(); ++c) {
      manifest << "\tcaption" << c << '=' << s.captions[c];
    }
    manifest << '\n';
  }
}

int palette_index(const std::vector<PaletteColor>& palette, const std::string& name) {
  for (std::size_t i = 0; i < palette.size(); ++i) {
    if (name == palette[i].name) return static_cast<int>(i);
  }
  throw IoError("unknown palette color in manifest: " + name);
}

int shape_index(const std::string& name) {
  for (std::size_t i = 0; i < shape_names().size(); ++i) {
    if (name == shape_names()[i]) return static_cast<int>(i);
  }
  throw IoError("unknown shape in manifest: " + name);
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir + "/images", ec);
  fs::create_directories(dir + "/masks", ec);
  if (!fs::exists(dir + "/images") || !fs::exists(dir + "/masks")) {
    throw IoError("cannot create dataset directory: " + dir);
  }
  ds.vocab.save(dir + "/vocab.txt");
  std::ofstream manifest(dir + "/manifest.tsv", std::ios::binary);
  if (!manifest) throw IoError("cannot write manifest: " + dir + "/manifest.tsv");
  write_split(ds, ds.train, "train", dir, manifest);
  write_split(ds, ds.test, "test", dir, manifest);
}

Dataset load_dataset(const std::string& dir) {
  Dataset ds;
  ds.vocab = Vocabulary::load(dir + "/vocab.txt");
  std::ifstream manifest(dir + "/manifest.tsv", std::ios::binary);
  if (!manifest) throw IoError("cannot read manifest: " + dir + "/manifest.tsv");

  std::string line;
  bool any_border = false;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::map<std::string, std::string> fields;
    std::size_t start = 0;
    while (start <= line.size()) {
      std::size_t tab = line.find('\t', start);
      if (tab == std::string::npos) tab = line.size();
      const std::string part = line.substr(start, tab - start);
      const std::size_t eq = part.find('=');
      if (eq != std::string::npos) {
        fields[part.substr(0, eq)] = part.substr(eq + 1);
      }
      start = tab + 1;
    }

    ImageSample s;
    s.spec.shape = static_cast<ShapeKind>(shape_index(fields.at("shape")));
    s.spec.object_color = palette_index(object_palette(), fields.at("color"));
    s.spec.background_color =
        palette_index(background_palette(), fields.at("bg"));
    if (fields.at("border") != "-") {
      s.spec.border_color = palette_index(object_palette(), fields.at("border"));
      any_border = true;
    }
    s.spec.jitter_x = std::stoi(fields.at("cx")) - kCanvas / 2;
    s.spec.jitter_y = std::stoi(fields.at("cy")) - kCanvas / 2;
    s.spec.size = std::stoi(fields.at("size"));

    s.image = rgb_to_tensor<float>(read_ppm(dir + "/" + fields.at("image")));
    const GrayImage mask = read_pgm(dir + "/" + fields.at("mask"));
    s.mask.resize(mask.pixels.size());
    for (std::size_t p = 0; p < mask.pixels.size(); ++p) {
      s.mask[p] = mask.pixels[p] >= 128 ? 1 : 0;
    }
    for (int c = 0;; ++c) {
      auto it = fields.find("caption" + std::to_string(c));
      if (it == fields.end()) break;
      s.captions.push_back(it->second);
    }

    if (fields.at("split") == "train") {
      ds.train.push_back(std::move(s));
    } else {
      ds.test.push_back(std::move(s));
    }
  }
  ds.cfg.n_train = static_cast<int>(ds.train.size());
  ds.cfg.n_test = static_cast<int>(ds.test.size());
  ds.cfg.bordered = any_border;

  // Recover the held-out combos from the splits themselves.
  auto combo_in_train = [&ds](const AttributeSpec& c) {
    for (const auto& s : ds.train) {
      if (s.spec.same_combo(c)) return true;
    }
    return false;
  };
  for (const auto& s : ds.test) {
    bool already = false;
    for (const auto& c : ds.held_out_combos) {
      if (c.same_combo(s.spec)) {
        already = true;
        break;
      }
    }
    if (!already && !combo_in_train(s.spec)) {
      ds.held_out_combos.push_back(s.spec);
    }
  }
  return ds;
}

std::string manifest_hash(const std::string& dir) {
  return digest_hex(sha256_file(dir + "/manifest.tsv"));
}

int probe_region_color(const TensorF& image, const std::vector<std::uint8_t>& region,
                       const std::vector<PaletteColor>& palette) {
  double sum_r = 0, sum_g = 0, sum_b = 0;
  std::size_t count = 0;
  const int side = image.shape[1];
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      if (!region[static_cast<std::size_t>(y) * side + x]) continue;
      sum_r += (image.at(0, y, x) + 1.0) * 0.5;
      sum_g += (image.at(1, y, x) + 1.0) * 0.5;
      sum_b += (image.at(2, y, x) + 1.0) * 0.5;
      ++count;
    }
  }
  if (count == 0) throw ContractError("color probe region is empty");
  const double r = sum_r / count, g = sum_g / count, b = sum_b / count;
  int best = 0;
  double best_d = 1e300;
  for (std::size_t i = 0; i < palette.size(); ++i) {
    const double dr = r - palette[i].r / 255.0;
    const double dg = g - palette[i].g / 255.0;
    const double db = b - palette[i].b / 255.0;
    const double d = dr * dr + dg * dg + db * db;
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(i);
    }
  }
  return best;
}

}  // namespace tagan::synth
