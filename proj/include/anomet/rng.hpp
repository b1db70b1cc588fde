#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "anomet/hash.hpp"

namespace anomet {

// Deterministic random source. mt19937_64 supplies the bits; the
// distributions are implemented here rather than taken from <random>
// because the standard does not pin their algorithms and we need the
// same draws on every platform and standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1) with 53 random mantissa bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform index in [0, n) by rejection, so every index is exactly
  // equally likely.
  std::size_t index(std::size_t n) {
    if (n == 0) throw std::invalid_argument("Rng::index: n must be positive");
    const std::uint64_t span = static_cast<std::uint64_t>(n);
    const std::uint64_t threshold = (0 - span) % span;
    for (;;) {
      std::uint64_t x = engine_();
      if (x >= threshold) return static_cast<std::size_t>(x % span);
    }
  }

  // Standard normal via Box-Muller. Both outputs of each transform are
  // consumed, so draws come in deterministic pairs.
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = index(i + 1);
      std::swap(v[i], v[j]);
    }
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n,
                                                      std::size_t k) {
    if (k > n) {
      throw std::invalid_argument(
          "Rng::sample_without_replacement: k exceeds n");
    }
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
      const std::size_t j = i + index(n - i);
      std::swap(pool[i], pool[j]);
      out.push_back(pool[i]);
    }
    return out;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// Independent stream for a named purpose. Streams derived from the same
// seed with different tags are decorrelated; the same (seed, tag) always
// yields the same stream.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
  return splitmix64(seed ^ fnv1a64(tag));
}

}  // namespace anomet
