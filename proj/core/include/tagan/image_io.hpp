// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagan/tensor.hpp"

namespace tagan {

/// 8-bit RGB image, row-major, interleaved channels.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // 3 * width * height
};

/// 8-bit grayscale image.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // width * height
};

void write_ppm(const std::string& path, const RgbImage& image);   // P6
RgbImage read_ppm(const std::string& path);
void write_pgm(const std::string& path, const GrayImage& image);  // P5
GrayImage read_pgm(const std::string& path);

/// [3, h, w] tensor in [-1, 1] -> interleaved bytes (round, clamp).
template <typename S>
RgbImage tensor_to_rgb(const TensorData<S>& t);

/// Interleaved bytes -> [3, h, w] tensor in [-1, 1].
template <typename S>
TensorData<S> rgb_to_tensor(const RgbImage& image);

/// [h, w] tensor in [0, 1] -> grayscale bytes.
template <typename S>
GrayImage tensor_to_gray(const TensorData<S>& t);

#define TAGAN_EXTERN_IMGIO(S)                                 \
  extern template RgbImage tensor_to_rgb(const TensorData<S>&);  \
  extern template TensorData<S> rgb_to_tensor(const RgbImage&);  \
  extern template GrayImage tensor_to_gray(const TensorData<S>&);
TAGAN_EXTERN_IMGIO(float)
TAGAN_EXTERN_IMGIO(double)
#undef TAGAN_EXTERN_IMGIO

}  // namespace tagan
