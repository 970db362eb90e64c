#pragma once

#include <cstdint>
#include <random>

namespace ntkmmd {

using Rng = std::mt19937_64;

/// Derives an independent stream seed from a root seed and a stream index.
///
/// Streams are indexed, not drawn sequentially, so replica k receives the
/// same seed no matter how replicas are scheduled across threads. The mix is
/// two rounds of splitmix64 over (root, index).
constexpr std::uint64_t derive_seed(std::uint64_t root, std::uint64_t stream) noexcept {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(root) ^ (stream * 0xd1342543de82ef95ULL + 0x632be59bd9b4e019ULL));
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

// Named stream indices for seeds derived inside a single test run.
namespace stream {
inline constexpr std::uint64_t split = 1;
inline constexpr std::uint64_t init = 2;
inline constexpr std::uint64_t order = 3;
inline constexpr std::uint64_t bootstrap = 4;
inline constexpr std::uint64_t data = 5;
}  // namespace stream

}  // namespace ntkmmd
