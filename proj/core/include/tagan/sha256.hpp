// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace tagan {

using Digest256 = std::array<std::uint8_t, 32>;

Digest256 sha256_bytes(const void* data, std::size_t size);
Digest256 sha256_string(const std::string& s);
Digest256 sha256_file(const std::string& path);
std::string digest_hex(const Digest256& digest);

}  // namespace tagan
