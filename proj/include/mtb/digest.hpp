#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace mtb {

// Streaming SHA-256. Fingerprints must be identical for identical input
// bytes on every machine, so all hashed values are serialized to explicit
// byte layouts (little-endian integers, raw u8 pixels) before hashing.
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t len);
  void update(const std::string& s) { update(s.data(), s.size()); }
  void update_u32(std::uint32_t v);
  void update_u64(std::uint64_t v);

  // Finalizes and returns the lowercase hex digest. The object must not be
  // reused afterwards.
  std::string hex();

 private:
  void* ctx_;
};

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);
std::string sha256_hex(const std::vector<std::uint8_t>& bytes);

}  // namespace mtb
