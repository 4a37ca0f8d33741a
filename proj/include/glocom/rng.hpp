#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace glocom {

using Rng = std::mt19937_64;

/// Derives an independent generator for a named sub-stream of a run seed.
/// Every stage (clustering, init, training noise, synthesis) draws from its
/// own stream so that changing one stage never perturbs another.
inline Rng make_stream(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  // splitmix64 finalizer over the combined key
  std::uint64_t z = seed ^ (h + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2));
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return Rng(z);
}

}  // namespace glocom
