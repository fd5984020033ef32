#include "sparsebandit/rng.hpp"

namespace sparsebandit {

std::uint64_t mix64(std::uint64_t x) {
  // SplitMix64 finalizer (Steele, Lea, Flood 2014).
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
  return mix64(seed ^ mix64(value));
}

std::uint64_t hash_tag(std::string_view tag) {
  // FNV-1a.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RngStream derive_stream(std::uint64_t root, std::initializer_list<std::uint64_t> path,
                        std::string_view tag) {
  std::uint64_t s = root;
  for (std::uint64_t p : path) s = hash_combine(s, p);
  return RngStream(hash_combine(s, hash_tag(tag)));
}

}  // namespace sparsebandit
