// SPDX-License-Identifier: Apache-2.0
#include "seqdesc/rng.hpp"

#include <cmath>

#include "seqdesc/errors.hpp"

namespace seqdesc {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace

std::uint64_t RngStream::next_u64() {
  counter_ += 1;
  return mix(key_ + counter_ * kGolden);
}

double RngStream::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RngStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_normal_;
  }
  // u1 in (0, 1] so the log is finite
  double u1 = 1.0 - uniform();
  double u2 = uniform();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * 3.14159265358979323846 * u2;
  cached_normal_ = r * std::sin(theta);
  has_cached_ = true;
  return r * std::cos(theta);
}

std::uint32_t RngStream::below(std::uint32_t n) {
  if (n == 0) throw ContractError("RngStream::below: n must be > 0");
  // Lemire multiply-shift mapping of a 32-bit draw onto [0, n)
  std::uint64_t x = next_u64() >> 32;
  return static_cast<std::uint32_t>((x * n) >> 32);
}

std::uint64_t derive_key(std::uint64_t master, std::string_view purpose) {
  return mix(master ^ fnv1a(purpose));
}

std::uint64_t derive_key(std::uint64_t master, std::string_view purpose,
                         std::uint64_t index) {
  return mix(derive_key(master, purpose) + (index + 1) * kGolden);
}

}  // namespace seqdesc
