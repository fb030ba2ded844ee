#pragma once

#include <algorithm>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace swing {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a tuple of tags
// (ensemble, node, walk, ...). Distinct tag tuples give unrelated streams.
inline std::uint64_t stream_seed(std::uint64_t seed,
                                 std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
  return h;
}

inline Rng make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
  return Rng(stream_seed(seed, tags));
}

// Uniform on the open interval (0, 1).
inline double uniform_open(Rng& rng) {
  constexpr double lo = std::numeric_limits<double>::min();
  constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2;
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  return std::clamp(u, lo, hi);
}

// Stream tags shared across modules.
namespace tags {
inline constexpr std::uint64_t walk = 0x5741;
inline constexpr std::uint64_t length = 0x4c454e;
inline constexpr std::uint64_t precompute = 0x505245;
inline constexpr std::uint64_t features = 0x464541;
inline constexpr std::uint64_t deposit = 0x444550;
}  // namespace tags

}  // namespace swing
