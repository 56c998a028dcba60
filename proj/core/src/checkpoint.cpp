// SPDX-License-Identifier: Apache-2.0
#include "tagan/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "tagan/error.hpp"

namespace tagan {

namespace {

constexpr char kMagic[4] = {'T', 'A', 'G', 'N'};

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

std::uint32_t take_u32(const std::uint8_t*& p, const std::uint8_t* end,
                       const std::string& path) {
  if (end - p < 4) throw IoError("truncated checkpoint: " + path);
  std::uint32_t v = static_cast<std::uint32_t>(p[0]) |
                    (static_cast<std::uint32_t>(p[1]) << 8) |
                    (static_cast<std::uint32_t>(p[2]) << 16) |
                    (static_cast<std::uint32_t>(p[3]) << 24);
  p += 4;
  return v;
}

template <typename S>
constexpr std::uint8_t dtype_tag() {
  if constexpr (sizeof(S) == 4) {
    return kDtypeF32;
  } else {
    return kDtypeF64;
  }
}

static_assert(std::endian::native == std::endian::little,
              "checkpoint writer assumes a little-endian host");

}  // namespace

template <typename S>
void Checkpoint::add(const std::string& name, const TensorData<S>& t) {
  TensorRecord rec;
  rec.name = name;
  rec.dtype = dtype_tag<S>();
  for (int d : t.shape) rec.dims.push_back(static_cast<std::uint32_t>(d));
  rec.payload.resize(t.data.size() * sizeof(S));
  std::memcpy(rec.payload.data(), t.data.data(), rec.payload.size());
  tensors.push_back(std::move(rec));
}

const TensorRecord* Checkpoint::find(const std::string& name) const {
  for (const auto& rec : tensors) {
    if (rec.name == name) return &rec;
  }
  return nullptr;
}

template <typename S>
TensorData<S> Checkpoint::get(const std::string& name) const {
  const TensorRecord* rec = find(name);
  if (!rec) throw IoError("checkpoint has no tensor named '" + name + "'");
  if (rec->dtype != dtype_tag<S>()) {
    throw IoError("tensor '" + name + "' has dtype tag " +
                  std::to_string(rec->dtype) + ", expected " +
                  std::to_string(dtype_tag<S>()));
  }
  Shape shape;
  for (auto d : rec->dims) shape.push_back(static_cast<int>(d));
  TensorData<S> t(shape);
  if (rec->payload.size() != t.data.size() * sizeof(S)) {
    throw IoError("tensor '" + name + "' payload does not match its shape");
  }
  std::memcpy(t.data.data(), rec->payload.data(), rec->payload.size());
  return t;
}

void Checkpoint::save(const std::string& path) const {
  std::string out;
  out.append(kMagic, 4);
  put_u32(out, version);
  out.append(reinterpret_cast<const char*>(config_digest.data()),
             config_digest.size());
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& rec : tensors) {
    put_u32(out, static_cast<std::uint32_t>(rec.name.size()));
    out.append(rec.name);
    out.push_back(static_cast<char>(rec.dtype));
    put_u32(out, static_cast<std::uint32_t>(rec.dims.size()));
    for (auto d : rec.dims) put_u32(out, d);
    out.append(reinterpret_cast<const char*>(rec.payload.data()),
               rec.payload.size());
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write on checkpoint: " + path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read checkpoint: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  const std::uint8_t* p = bytes.data();
  const std::uint8_t* end = p + bytes.size();

  if (bytes.size() < 4 || std::memcmp(p, kMagic, 4) != 0) {
    throw IoError("not a checkpoint file (bad magic): " + path);
  }
  p += 4;

  Checkpoint ckpt;
  ckpt.version = take_u32(p, end, path);
  if (ckpt.version != kCheckpointVersion) {
    throw IoError("checkpoint version " + std::to_string(ckpt.version) +
                  " unsupported (this build reads version " +
                  std::to_string(kCheckpointVersion) + "): " + path);
  }
  if (end - p < static_cast<std::ptrdiff_t>(ckpt.config_digest.size())) {
    throw IoError("truncated checkpoint: " + path);
  }
  std::memcpy(ckpt.config_digest.data(), p, ckpt.config_digest.size());
  p += ckpt.config_digest.size();

  const std::uint32_t count = take_u32(p, end, path);
  ckpt.tensors.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorRecord rec;
    const std::uint32_t name_len = take_u32(p, end, path);
    if (end - p < static_cast<std::ptrdiff_t>(name_len) + 1) {
      throw IoError("truncated checkpoint: " + path);
    }
    rec.name.assign(reinterpret_cast<const char*>(p), name_len);
    p += name_len;
    rec.dtype = *p++;
    if (rec.dtype != kDtypeF32 && rec.dtype != kDtypeF64) {
      throw IoError("tensor '" + rec.name + "' has unknown dtype tag " +
                    std::to_string(rec.dtype) + ": " + path);
    }
    const std::uint32_t rank = take_u32(p, end, path);
    for (std::uint32_t d = 0; d < rank; ++d) {
      rec.dims.push_back(take_u32(p, end, path));
    }
    const std::size_t scalar = rec.dtype == kDtypeF32 ? 4 : 8;
    const std::size_t bytes_needed = rec.element_count() * scalar;
    if (end - p < static_cast<std::ptrdiff_t>(bytes_needed)) {
      throw IoError("truncated checkpoint payload for '" + rec.name + "': " + path);
    }
    rec.payload.assign(p, p + bytes_needed);
    p += bytes_needed;
    ckpt.tensors.push_back(std::move(rec));
  }
  if (p != end) throw IoError("trailing bytes after checkpoint payload: " + path);
  return ckpt;
}

template void Checkpoint::add(const std::string&, const TensorData<float>&);
template void Checkpoint::add(const std::string&, const TensorData<double>&);
template TensorData<float> Checkpoint::get(const std::string&) const;
template TensorData<double> Checkpoint::get(const std::string&) const;

}  // namespace tagan
