// ============================================================================
// digest.hpp -- SHA-256 digests and the canonical little-endian byte encoding
// used as the hashing pre-image for shards, batches, checkpoints and
// commitments.
// ============================================================================
#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace potv {

/// 32-byte SHA-256 digest.
struct Digest {
  std::array<std::uint8_t, 32> bytes{};

  bool operator==(const Digest&) const = default;
  auto operator<=>(const Digest&) const = default;

  std::string hex() const;
  static Digest from_hex(std::string_view hex);
};

/// SHA-256 over a byte buffer.
Digest sha256(std::span<const std::uint8_t> data);
Digest sha256(const std::vector<std::uint8_t>& data);

/// Canonical encoder: fixed little-endian layouts, independent of host
/// endianness. Everything that gets hashed goes through one of these.
class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void f32_array(std::span<const float> vs) {
    for (float v : vs) f32(v);
  }
  void str(std::string_view s) {
    u64(s.size());
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void raw(std::span<const std::uint8_t> d) { buf_.insert(buf_.end(), d.begin(), d.end()); }
  void digest(const Digest& d) { buf_.insert(buf_.end(), d.bytes.begin(), d.bytes.end()); }

  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  Digest sha256() const { return potv::sha256(buf_); }

 private:
  std::vector<std::uint8_t> buf_;
};

}  // namespace potv
