#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "anomet/errors.hpp"

namespace anomet {

// Embeddings are expected to live on the unit sphere; this is the slack
// allowed when checking that.
inline constexpr double kUnitNormTolerance = 1e-6;

// Below this norm a vector cannot be normalized meaningfully.
inline constexpr double kZeroNormThreshold = 1e-12;

struct Embedding {
  std::vector<double> values;

  Embedding() = default;
  explicit Embedding(std::vector<double> v) : values(std::move(v)) {}

  std::size_t dim() const { return values.size(); }
  double& operator[](std::size_t i) { return values[i]; }
  double operator[](std::size_t i) const { return values[i]; }
};

inline double norm(const Embedding& e) {
  double s = 0.0;
  for (double v : e.values) s += v * v;
  return std::sqrt(s);
}

inline bool is_unit_norm(const Embedding& e,
                         double tolerance = kUnitNormTolerance) {
  return std::fabs(norm(e) - 1.0) <= tolerance;
}

// Squared Euclidean distance. All distances in this library are squared;
// no square roots are taken anywhere on the comparison path.
inline double squared_distance(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw std::invalid_argument(
        "squared_distance: dimension mismatch (" + std::to_string(a.dim()) +
        " vs " + std::to_string(b.dim()) + ")");
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) {
    const double d = a.values[i] - b.values[i];
    s += d * d;
  }
  return s;
}

inline Embedding normalize(const Embedding& e) {
  const double n = norm(e);
  if (n < kZeroNormThreshold) {
    throw NumericalError("normalize: vector norm " + std::to_string(n) +
                         " is below " + std::to_string(kZeroNormThreshold));
  }
  Embedding out;
  out.values.reserve(e.dim());
  for (double v : e.values) out.values.push_back(v / n);
  return out;
}

// Full pairwise squared-distance matrix. The upper triangle is computed
// and mirrored, so the result is exactly symmetric.
inline std::vector<std::vector<double>> pairwise_distances(
    const std::vector<Embedding>& embeddings) {
  const std::size_t n = embeddings.size();
  std::vector<std::vector<double>> out(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = squared_distance(embeddings[i], embeddings[j]);
      out[i][j] = d;
      out[j][i] = d;
    }
  }
  return out;
}

}  // namespace anomet
