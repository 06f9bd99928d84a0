#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace gog {

/// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);

/// First eight bytes of the SHA-256 digest, big-endian.
std::uint64_t sha256_u64(std::string_view bytes);

/// Uniform draw in [0,1) derived from the digest of key.
double hashed_unit(std::string_view key);

}  // namespace gog
