#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mmpoint {

// FNV-1a 64-bit content hash. Used for change detection on manifests and
// blobs, not for anything security-sensitive.
class Fnv64 {
 public:
  void update(const void* bytes, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  std::uint64_t digest() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::uint64_t hash_bytes(const void* bytes, std::size_t n);
std::uint64_t hash_file(const std::string& path);
std::string hex64(std::uint64_t v);

}  // namespace mmpoint
