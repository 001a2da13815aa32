// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

namespace seqdesc {

/// Counter-based random stream: a splitmix64-style finalizer applied to
/// (key, counter). Streams with different keys are independent; drawing from
/// one stream never advances another, which keeps per-purpose draws (noise,
/// dropout, init, data) stable when a sibling purpose is toggled off.
class RngStream {
 public:
  RngStream() = default;
  explicit RngStream(std::uint64_t key) : key_(key) {}

  std::uint64_t next_u64();

  /// Uniform double in [0, 1), 53 mantissa bits.
  double uniform();

  /// Standard normal via Box-Muller (second draw of each pair is cached).
  double normal();

  /// Uniform integer in [0, n); n must be > 0.
  std::uint32_t below(std::uint32_t n);

  std::uint64_t key() const { return key_; }

 private:
  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

/// Derives a child key from a master seed and a purpose label, optionally
/// indexed (e.g. per-step or per-epoch sub-streams).
std::uint64_t derive_key(std::uint64_t master, std::string_view purpose);
std::uint64_t derive_key(std::uint64_t master, std::string_view purpose,
                         std::uint64_t index);

inline RngStream derive_stream(std::uint64_t master, std::string_view purpose) {
  return RngStream(derive_key(master, purpose));
}
inline RngStream derive_stream(std::uint64_t master, std::string_view purpose,
                               std::uint64_t index) {
  return RngStream(derive_key(master, purpose, index));
}

/// Fisher-Yates shuffle driven by the given stream.
template <typename T>
void shuffle(std::vector<T>& items, RngStream& rng) {
  if (items.size() < 2) return;
  for (std::size_t i = items.size() - 1; i > 0; --i) {
    std::size_t j = rng.below(static_cast<std::uint32_t>(i + 1));
    std::swap(items[i], items[j]);
  }
}

}  // namespace seqdesc
