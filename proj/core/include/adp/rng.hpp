// Seed derivation for reproducible, independently-seeded random streams.
//
// Every consumer (trial, purpose) gets its own std::mt19937_64 whose seed is
// a splitmix64 hash of the parent seed and a list of tags, so streams never
// depend on the order in which other streams were created.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace adp {

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// FNV-1a, used to turn purpose labels into tags.
constexpr std::uint64_t hash_tag(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

constexpr std::uint64_t derive_seed(std::uint64_t parent,
                                    std::initializer_list<std::uint64_t> tags) {
  std::uint64_t h = splitmix64(parent);
  for (std::uint64_t t : tags) h = splitmix64(h ^ splitmix64(t));
  return h;
}

using Engine = std::mt19937_64;

inline Engine make_engine(std::uint64_t parent, std::string_view purpose) {
  return Engine(derive_seed(parent, {hash_tag(purpose)}));
}

}  // namespace adp
