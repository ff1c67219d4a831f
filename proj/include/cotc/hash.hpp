#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace cotc {

// Lowercase hex SHA-256 digest of `data`.
std::string sha256_hex(std::string_view data);

// First 8 digest bytes of SHA-256(data), big-endian.
std::uint64_t sha256_u64(std::string_view data);

// Seed for a named sub-computation, reproducible across machines.
std::uint64_t derive_seed(std::uint64_t base_seed, std::string_view label);

}  // namespace cotc
