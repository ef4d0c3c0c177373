#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace aime {

/// Incremental SHA-256 (backed by OpenSSL's EVP interface).
class Sha256 {
 public:
  Sha256();
  ~Sha256();
  Sha256(const Sha256&) = delete;
  Sha256& operator=(const Sha256&) = delete;

  void update(const void* data, std::size_t len);
  void update(const std::string& s) { update(s.data(), s.size()); }
  void update_u64(std::uint64_t v);     // little-endian
  void update_f64(const double* data, std::size_t count);  // little-endian IEEE-754

  /// Finalizes and returns the lowercase hex digest. The object is spent afterwards.
  std::string hex_digest();

 private:
  void* ctx_;
};

std::string sha256_hex(const void* data, std::size_t len);
std::string sha256_hex(const std::string& s);

}  // namespace aime
