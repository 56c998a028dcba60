// SPDX-License-Identifier: Apache-2.0
#include "tagan/image_io.hpp"

#include <cmath>
#include <fstream>

#include "tagan/error.hpp"

namespace tagan {

namespace {

void write_pnm(const std::string& path, const char* magic, int width,
               int height, const std::vector<std::uint8_t>& payload) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write image: " + path);
  out << magic << '\n' << width << ' ' << height << '\n' << 255 << '\n';
  out.write(reinterpret_cast<const char*>(payload.data()),
            static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("short write on image: " + path);
}

struct PnmHeader {
  int width = 0;
  int height = 0;
};

int next_pnm_int(std::istream& in, const std::string& path) {
  // Skips whitespace and '#' comments per the PNM grammar.
  int c = in.get();
  while (c == '#' || std::isspace(c)) {
    if (c == '#') {
      while (c != '\n' && c != EOF) c = in.get();
    }
    c = in.get();
  }
  int value = 0;
  bool any = false;
  while (c >= '0' && c <= '9') {
    value = value * 10 + (c - '0');
    any = true;
    c = in.get();
  }
  if (!any) throw IoError("malformed image header: " + path);
  return value;
}

PnmHeader read_pnm_header(std::istream& in, const char* magic,
                          const std::string& path) {
  char m[2];
  in.read(m, 2);
  if (!in || m[0] != magic[0] || m[1] != magic[1]) {
    throw IoError("image is not " + std::string(magic) + ": " + path);
  }
  PnmHeader h;
  h.width = next_pnm_int(in, path);
  h.height = next_pnm_int(in, path);
  const int maxval = next_pnm_int(in, path);
  if (maxval != 255) throw IoError("only maxval 255 supported: " + path);
  if (h.width < 1 || h.height < 1) throw IoError("bad image size: " + path);
  return h;
}

}  // namespace

void write_ppm(const std::string& path, const RgbImage& image) {
  write_pnm(path, "P6", image.width, image.height, image.pixels);
}

RgbImage read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read image: " + path);
  const PnmHeader h = read_pnm_header(in, "P6", path);
  RgbImage img;
  img.width = h.width;
  img.height = h.height;
  img.pixels.resize(static_cast<std::size_t>(3) * h.width * h.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw IoError("truncated image payload: " + path);
  return img;
}

void write_pgm(const std::string& path, const GrayImage& image) {
  write_pnm(path, "P5", image.width, image.height, image.pixels);
}

GrayImage read_pgm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read image: " + path);
  const PnmHeader h = read_pnm_header(in, "P5", path);
  GrayImage img;
  img.width = h.width;
  img.height = h.height;
  img.pixels.resize(static_cast<std::size_t>(h.width) * h.height);
  in.read(reinterpret_cast<char*>(img.pixels.data()),
          static_cast<std::streamsize>(img.pixels.size()));
  if (!in) throw IoError("truncated image payload: " + path);
  return img;
}

template <typename S>
RgbImage tensor_to_rgb(const TensorData<S>& t) {
  if (t.rank() != 3 || t.shape[0] != 3) {
    throw DimensionError("tensor_to_rgb expects [3,h,w], got " + shape_str(t.shape));
  }
  const int h = t.shape[1], w = t.shape[2];
  RgbImage img;
  img.width = w;
  img.height = h;
  img.pixels.resize(static_cast<std::size_t>(3) * w * h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v01 = (static_cast<double>(t.at(c, y, x)) + 1.0) * 0.5;
        const double scaled = std::round(v01 * 255.0);
        const double clamped = scaled < 0 ? 0 : (scaled > 255 ? 255 : scaled);
        img.pixels[(static_cast<std::size_t>(y) * w + x) * 3 + c] =
            static_cast<std::uint8_t>(clamped);
      }
    }
  }
  return img;
}

template <typename S>
TensorData<S> rgb_to_tensor(const RgbImage& image) {
  TensorData<S> t({3, image.height, image.width});
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const double v =
            image.pixels[(static_cast<std::size_t>(y) * image.width + x) * 3 + c] /
            255.0;
        t.at(c, y, x) = static_cast<S>(v * 2.0 - 1.0);
      }
    }
  }
  return t;
}

template <typename S>
GrayImage tensor_to_gray(const TensorData<S>& t) {
  if (t.rank() != 2) {
    throw DimensionError("tensor_to_gray expects [h,w], got " + shape_str(t.shape));
  }
  GrayImage img;
  img.height = t.shape[0];
  img.width = t.shape[1];
  img.pixels.resize(t.numel());
  for (std::size_t i = 0; i < t.numel(); ++i) {
    const double scaled = std::round(static_cast<double>(t.data[i]) * 255.0);
    const double clamped = scaled < 0 ? 0 : (scaled > 255 ? 255 : scaled);
    img.pixels[i] = static_cast<std::uint8_t>(clamped);
  }
  return img;
}

#define TAGAN_INSTANTIATE_IMGIO(S)                        \
  template RgbImage tensor_to_rgb(const TensorData<S>&);  \
  template TensorData<S> rgb_to_tensor(const RgbImage&);  \
  template GrayImage tensor_to_gray(const TensorData<S>&);
TAGAN_INSTANTIATE_IMGIO(float)
TAGAN_INSTANTIATE_IMGIO(double)
#undef TAGAN_INSTANTIATE_IMGIO

}  // namespace tagan
