#include "gog/hashing.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace gog {

namespace {

std::array<unsigned char, 32> digest(std::string_view bytes) {
  std::array<unsigned char, 32> out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 || len != out.size())
    throw std::runtime_error("SHA-256 digest failed");
  return out;
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  static constexpr char kHex[] = "0123456789abcdef";
  auto d = digest(bytes);
  std::string out;
  out.reserve(64);
  for (unsigned char c : d) {
    out.push_back(kHex[c >> 4]);
    out.push_back(kHex[c & 0xf]);
  }
  return out;
}

std::uint64_t sha256_u64(std::string_view bytes) {
  auto d = digest(bytes);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v = (v << 8) | d[static_cast<std::size_t>(i)];
  return v;
}

double hashed_unit(std::string_view key) {
  // 53 high bits give an exactly representable double in [0,1).
  return static_cast<double>(sha256_u64(key) >> 11) * 0x1.0p-53;
}

}  // namespace gog
