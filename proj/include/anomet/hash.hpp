#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace anomet {

// FNV-1a, 64 bit. Used for config/output fingerprints in manifests and for
// folding string tags into seed derivation.
inline std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : data) {
    h ^= static_cast<std::uint64_t>(c);
    h *= 0x100000001b3ull;
  }
  return h;
}

// splitmix64 finalizer; decorrelates seeds that differ in few bits.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return out;
}

}  // namespace anomet
