#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

namespace atrophy {

/// 64-bit FNV-1a, incremental.
class Fnv1a {
 public:
  void update(const void* data, std::size_t n) noexcept {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) noexcept { update(s.data(), s.size()); }
  template <typename T>
  void update(std::span<const T> s) noexcept {
    update(s.data(), s.size_bytes());
  }
  std::uint64_t digest() const noexcept { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

/// 16 lowercase hex digits.
std::string hex64(std::uint64_t v);

}  // namespace atrophy
