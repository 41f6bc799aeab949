#include "potv/digest.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace potv {

Digest sha256(std::span<const std::uint8_t> data) {
  Digest d;
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), d.bytes.data(), &len, EVP_sha256(), nullptr) != 1 ||
      len != 32) {
    throw std::runtime_error("sha256: EVP_Digest failed");
  }
  return d;
}

Digest sha256(const std::vector<std::uint8_t>& data) {
  return sha256(std::span<const std::uint8_t>(data.data(), data.size()));
}

std::string Digest::hex() const {
  static const char* k = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (std::uint8_t b : bytes) {
    s.push_back(k[b >> 4]);
    s.push_back(k[b & 0xf]);
  }
  return s;
}

Digest Digest::from_hex(std::string_view hex) {
  if (hex.size() != 64) throw std::invalid_argument("Digest::from_hex: need 64 hex chars");
  auto nib = [](char c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    throw std::invalid_argument("Digest::from_hex: bad hex char");
  };
  Digest d;
  for (int i = 0; i < 32; ++i) {
    d.bytes[static_cast<size_t>(i)] =
        static_cast<std::uint8_t>((nib(hex[2 * i]) << 4) | nib(hex[2 * i + 1]));
  }
  return d;
}

}  // namespace potv
