#pragma once

#include <cstdint>

namespace spotlight {

// 64-bit avalanche mixer (the splitmix64 finalizer). Every output bit depends
// on every input bit, so `mix64(k) % n` is close to uniform for any n.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t mix64(std::uint64_t x, std::uint64_t seed) noexcept {
  return mix64(x ^ mix64(seed));
}

// Seeds used to derive independent hash streams from one flow key.
inline constexpr std::uint64_t kStage2Seed = 0x5f3759df2c1b3c6dULL;
inline constexpr std::uint64_t kHopSeed = 0x243f6a8885a308d3ULL;
inline constexpr std::uint64_t kLbSeed = 0x13198a2e03707344ULL;

}  // namespace spotlight
