#pragma once

#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

#include "catchrel/hashing.hpp"

namespace catchrel {

/// SplitMix64. Tiny, portable, and fully specified, so shuffles reproduce
/// bit-exactly on any platform; std:: distributions are implementation-defined.
class SplitMix64 {
 public:
  static constexpr std::string_view kName = "splitmix64-v1";

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, bound) by rejection sampling.
  std::uint64_t below(std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = -bound % bound;  // 2^64 mod bound
    for (;;) {
      const auto r = next();
      if (r >= limit) return r % bound;
    }
  }

  /// First 8 bytes of SHA-256 over the parts joined with '\x1f', prefixed by the generator name.
  template <typename... Parts>
  static std::uint64_t derive_seed(const Parts&... parts) {
    Sha256 h;
    h.update(kName);
    ((h.update("\x1f"), h.update(std::string_view(parts))), ...);
    const auto d = h.digest();
    std::uint64_t s = 0;
    for (int i = 0; i < 8; ++i) s = (s << 8) | d[static_cast<std::size_t>(i)];
    return s;
  }

 private:
  std::uint64_t state_;
};

template <typename T>
void fisher_yates(std::vector<T>& v, SplitMix64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace catchrel
