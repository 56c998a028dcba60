// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "tagan/error.hpp"

namespace tagan {

using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major value container. Carries no gradient and no graph
/// identity; autodiff nodes wrap two of these (value and grad).
template <typename S>
struct TensorData {
  Shape shape;
  std::vector<S> data;

  TensorData() = default;
  explicit TensorData(Shape s) : shape(std::move(s)) {
    validate_shape(shape);
    data.assign(shape_numel(shape), S(0));
  }
  TensorData(Shape s, std::vector<S> values)
      : shape(std::move(s)), data(std::move(values)) {
    validate_shape(shape);
    if (shape_numel(shape) != data.size()) {
      throw DimensionError("tensor data length " + std::to_string(data.size()) +
                           " does not match shape " + shape_str(shape));
    }
  }

  static TensorData scalar(S v) { return TensorData({1}, {v}); }

  std::size_t numel() const { return data.size(); }
  int dim(std::size_t i) const { return shape.at(i); }
  std::size_t rank() const { return shape.size(); }

  S& operator[](std::size_t i) { return data[i]; }
  const S& operator[](std::size_t i) const { return data[i]; }

  /// 2-D accessor (matrices).
  S& at(int r, int c) { return data[static_cast<std::size_t>(r) * shape[1] + c]; }
  const S& at(int r, int c) const {
    return data[static_cast<std::size_t>(r) * shape[1] + c];
  }

  /// 3-D accessor (channel, row, col maps).
  S& at(int ch, int r, int c) {
    return data[(static_cast<std::size_t>(ch) * shape[1] + r) * shape[2] + c];
  }
  const S& at(int ch, int r, int c) const {
    return data[(static_cast<std::size_t>(ch) * shape[1] + r) * shape[2] + c];
  }

  bool all_finite() const {
    for (const S& v : data) {
      if (!std::isfinite(static_cast<double>(v))) return false;
    }
    return true;
  }

  template <typename T>
  TensorData<T> cast() const {
    TensorData<T> out;
    out.shape = shape;
    out.data.resize(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
      out.data[i] = static_cast<T>(data[i]);
    }
    return out;
  }

private:
  static void validate_shape(const Shape& s) {
    for (int d : s) {
      if (d <= 0) {
        throw DimensionError("tensor dimensions must be positive, got " +
                             shape_str(s));
      }
    }
  }
};

using TensorF = TensorData<float>;
using TensorD = TensorData<double>;

}  // namespace tagan
