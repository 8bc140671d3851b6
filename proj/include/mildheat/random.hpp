#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace mildheat {

using Engine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of the sub-stream addressed by a sequence of counters. Depends only on
/// (master, counters), never on how many other streams exist or the order in
/// which they are drawn.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> counters) {
  std::uint64_t h = splitmix64(master);
  for (std::uint64_t c : counters) h = splitmix64(h ^ splitmix64(c + 0x632be59bd9b4e019ULL));
  return h;
}

/// Stream tags used with derive_seed.
namespace stream {
inline constexpr std::uint64_t wiener = 1;
inline constexpr std::uint64_t fbm = 2;
inline constexpr std::uint64_t replicate = 3;
}  // namespace stream

}  // namespace mildheat
