#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace cuber {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a base seed and a list of tags
/// (task index, purpose code, ...) with splitmix64 finalization.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  std::uint64_t h = mix(base);
  for (std::uint64_t t : tags) h = mix(h ^ mix(t));
  return h;
}

}  // namespace cuber
