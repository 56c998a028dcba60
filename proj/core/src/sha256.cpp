// SPDX-License-Identifier: Apache-2.0
#include "tagan/sha256.hpp"

#include <openssl/sha.h>

#include <cstdio>
#include <fstream>

#include "tagan/error.hpp"

namespace tagan {

Digest256 sha256_bytes(const void* data, std::size_t size) {
  Digest256 out;
  SHA256(static_cast<const unsigned char*>(data), size, out.data());
  return out;
}

Digest256 sha256_string(const std::string& s) {
  return sha256_bytes(s.data(), s.size());
}

Digest256 sha256_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read file for hashing: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  return sha256_string(bytes);
}

std::string digest_hex(const Digest256& digest) {
  std::string out;
  out.reserve(64);
  char buf[3];
  for (std::uint8_t b : digest) {
    std::snprintf(buf, sizeof(buf), "%02x", b);
    out += buf;
  }
  return out;
}

}  // namespace tagan
