#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace pvsizing {

using Rng = std::mt19937_64;

/// splitmix64 finaliser; a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// 64-bit FNV-1a.
constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Every random stream in the project is seeded through this function:
///   seed = mix64(base ^ mix64(fnv1a(stream) + index))
/// so that a single base seed fans out into independent named streams.
constexpr std::uint64_t derive_seed(std::uint64_t base, std::string_view stream,
                                    std::uint64_t index = 0) noexcept {
  return mix64(base ^ mix64(fnv1a(stream) + index));
}

inline Rng make_rng(std::uint64_t base, std::string_view stream,
                    std::uint64_t index = 0) {
  return Rng(derive_seed(base, stream, index));
}

}  // namespace pvsizing
