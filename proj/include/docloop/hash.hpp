#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace docloop {

// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

// 32-bit FNV-1a. Stable across platforms and runs.
constexpr std::uint32_t fnv1a32(std::string_view data) {
  std::uint32_t h = 2166136261u;
  for (unsigned char c : data) {
    h ^= c;
    h *= 16777619u;
  }
  return h;
}

}  // namespace docloop
