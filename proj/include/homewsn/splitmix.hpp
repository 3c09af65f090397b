#pragma once

#include <cstdint>
#include <utility>

namespace homewsn {

/// SplitMix64 (Steele, Lea, Flood). Chosen because it is trivial to
/// reproduce bit-for-bit in any language.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return mix(state_);
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Unbiased draw in [0, bound): values below 2^64 mod bound are rejected.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
};

/// Uniform ordered pair (v, w), v != w, over n nodes, 0-based. One `below`
/// draw of n(n-1) per pair: v = idx / (n-1), j = idx % (n-1), w = j < v ? j : j + 1.
inline std::pair<std::size_t, std::size_t> draw_ordered_pair(SplitMix64& rng, std::size_t n) {
  const std::uint64_t idx = rng.below(static_cast<std::uint64_t>(n) * (n - 1));
  const std::size_t v = static_cast<std::size_t>(idx / (n - 1));
  const std::size_t j = static_cast<std::size_t>(idx % (n - 1));
  return {v, j < v ? j : j + 1};
}

}  // namespace homewsn
