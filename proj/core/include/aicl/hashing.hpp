#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace aicl {

/// FNV-1a, 64 bit. Stable across platforms; used for feature hashing and the mock oracle.
std::uint64_t fnv1a64(std::string_view bytes) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);

}  // namespace aicl
