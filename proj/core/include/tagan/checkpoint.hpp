// SPDX-License-Identifier: Apache-2.0
//
// Binary checkpoint container: magic "TAGN", format version, a 32-byte
// config digest, then named tensors (optimizer state lives under the
// reserved "opt/" prefix). All integers and payloads are little-endian.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tagan/sha256.hpp"
#include "tagan/tensor.hpp"

namespace tagan {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint8_t kDtypeF32 = 1;
inline constexpr std::uint8_t kDtypeF64 = 2;

struct TensorRecord {
  std::string name;
  std::uint8_t dtype = kDtypeF32;
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> payload;  // little-endian row-major scalars

  std::size_t element_count() const {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

class Checkpoint {
public:
  std::uint32_t version = kCheckpointVersion;
  Digest256 config_digest{};
  std::vector<TensorRecord> tensors;

  template <typename S>
  void add(const std::string& name, const TensorData<S>& t);

  const TensorRecord* find(const std::string& name) const;

  /// Fetch by name; dtype must match S exactly (no silent conversion).
  template <typename S>
  TensorData<S> get(const std::string& name) const;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);
};

#define TAGAN_EXTERN_CKPT(S)                                               \
  extern template void Checkpoint::add(const std::string&,                 \
                                       const TensorData<S>&);              \
  extern template TensorData<S> Checkpoint::get(const std::string&) const;
TAGAN_EXTERN_CKPT(float)
TAGAN_EXTERN_CKPT(double)
#undef TAGAN_EXTERN_CKPT

}  // namespace tagan
