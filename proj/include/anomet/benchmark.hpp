#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "anomet/rng.hpp"
#include "anomet/types.hpp"
#include "anomet/version.hpp"

namespace anomet {

struct GenuineSpec {
  std::size_t components = 2;
  std::size_t count = 2000;
  double component_scale = 0.6;  // component center spread around the base
  double spread = 0.35;          // per-dimension noise inside a component
};

struct AttackClassSpec {
  PaiType pai_type = PaiType::print;
  std::string pai_subtype;
  double mean_scale = 2.0;  // displacement of the class center from the base
  double cov_scale = 0.6;   // per-dimension noise
  std::size_t count = 300;
};

struct DomainSpec {
  std::string tag;
  double offset_scale = 0.2;
};

struct SplitFractions {
  double train = 0.5;
  double dev = 0.2;
  double test = 0.3;
};

// All classes live near a shared base point away from the origin.
// Genuine samples come from a compact mixture hugging that base; each
// attack class is displaced from it in its own direction, with broader
// noise; every domain adds a shared offset. That shape encodes the
// working premise: genuine data is a closed set, attacks are open-ended
// and scattered around it.
struct BenchmarkSpec {
  std::uint64_t seed = 7;
  std::size_t input_dim = 8;
  GenuineSpec genuine;
  std::vector<AttackClassSpec> attack_classes;
  std::vector<DomainSpec> domains;
  SplitFractions splits;
};

struct Benchmark {
  std::vector<Sample> samples;
  BenchmarkSpec spec;
  std::string generator_version;
};

inline void validate_spec(const BenchmarkSpec& spec) {
  if (spec.input_dim == 0) {
    throw std::invalid_argument("benchmark spec: input_dim must be positive");
  }
  if (spec.genuine.count == 0 || spec.genuine.components == 0) {
    throw std::invalid_argument(
        "benchmark spec: genuine count and components must be positive");
  }
  if (spec.attack_classes.empty()) {
    throw std::invalid_argument(
        "benchmark spec: at least one attack class is required");
  }
  std::set<std::string> leaves;
  for (const AttackClassSpec& c : spec.attack_classes) {
    if (c.count == 0) {
      throw std::invalid_argument(
          "benchmark spec: attack class counts must be positive");
    }
    if (!valid_pai_subtype(c.pai_type, c.pai_subtype)) {
      throw std::invalid_argument(
          "benchmark spec: invalid subtype '" + c.pai_subtype +
          "' for pai_type '" + to_string(c.pai_type) + "'");
    }
    const std::string key =
        std::string(to_string(c.pai_type)) + "/" + c.pai_subtype;
    if (!leaves.insert(key).second) {
      throw std::invalid_argument("benchmark spec: duplicate attack class " +
                                  key);
    }
  }
  if (spec.domains.empty()) {
    throw std::invalid_argument(
        "benchmark spec: at least one domain is required");
  }
  std::set<std::string> tags;
  for (const DomainSpec& d : spec.domains) {
    if (d.tag.empty()) {
      throw std::invalid_argument("benchmark spec: empty domain tag");
    }
    if (!tags.insert(d.tag).second) {
      throw std::invalid_argument("benchmark spec: duplicate domain tag '" +
                                  d.tag + "'");
    }
  }
  const SplitFractions& f = spec.splits;
  if (f.train <= 0.0 || f.dev <= 0.0 || f.test <= 0.0 ||
      std::fabs(f.train + f.dev + f.test - 1.0) > 1e-9) {
    throw std::invalid_argument(
        "benchmark spec: split fractions must be positive and sum to 1");
  }
}

namespace detail {

inline std::vector<double> unit_direction(Rng& rng, std::size_t dim) {
  std::vector<double> v(dim);
  double nrm = 0.0;
  do {
    nrm = 0.0;
    for (double& x : v) {
      x = rng.gaussian();
      nrm += x * x;
    }
    nrm = std::sqrt(nrm);
  } while (nrm < 1e-12);
  for (double& x : v) x /= nrm;
  return v;
}

inline std::string padded_id(const std::string& prefix, std::size_t index) {
  std::string digits = std::to_string(index + 1);
  while (digits.size() < 6) digits.insert(digits.begin(), '0');
  return prefix + "-" + digits;
}

// Largest-remainder split of n over the three fractions; ties go to the
// earlier split.
inline std::array<std::size_t, 3> apportion(std::size_t n,
                                            const SplitFractions& f) {
  const double fracs[3] = {f.train, f.dev, f.test};
  std::array<std::size_t, 3> base{};
  double remainder[3];
  std::size_t assigned = 0;
  for (int k = 0; k < 3; ++k) {
    const double ideal = static_cast<double>(n) * fracs[k];
    base[static_cast<std::size_t>(k)] =
        static_cast<std::size_t>(std::floor(ideal));
    remainder[k] = ideal - std::floor(ideal);
    assigned += base[static_cast<std::size_t>(k)];
  }
  std::size_t leftover = n - assigned;
  while (leftover > 0) {
    int pick = 0;
    for (int k = 1; k < 3; ++k) {
      if (remainder[k] > remainder[pick]) pick = k;
    }
    ++base[static_cast<std::size_t>(pick)];
    remainder[pick] = -1.0;
    --leftover;
  }
  return base;
}

}  // namespace detail

// Deterministic in the spec alone: one rng stream seeded from spec.seed
// drives component centers, attack centers, domain offsets and sample
// noise in a fixed order. Splits are stratified per (class, domain) cell
// by largest remainder, assigned contiguously in generation order.
inline Benchmark generate(const BenchmarkSpec& spec) {
  validate_spec(spec);
  Rng rng(spec.seed);
  const std::size_t dim = spec.input_dim;

  // Shared base point; keeping it off the origin keeps the class
  // structure inside a compact cone of directions, so scale-invariant
  // consumers see nearby classes rather than scattered ones.
  const double base_radius = 2.0;
  std::vector<double> base = detail::unit_direction(rng, dim);
  for (double& x : base) x *= base_radius;

  std::vector<std::vector<double>> genuine_centers;
  for (std::size_t c = 0; c < spec.genuine.components; ++c) {
    std::vector<double> center = detail::unit_direction(rng, dim);
    for (std::size_t k = 0; k < dim; ++k) {
      center[k] = base[k] + spec.genuine.component_scale * center[k];
    }
    genuine_centers.push_back(std::move(center));
  }
  std::vector<std::vector<double>> attack_centers;
  for (const AttackClassSpec& c : spec.attack_classes) {
    std::vector<double> center = detail::unit_direction(rng, dim);
    for (std::size_t k = 0; k < dim; ++k) {
      center[k] = base[k] + c.mean_scale * center[k];
    }
    attack_centers.push_back(std::move(center));
  }
  std::vector<std::vector<double>> domain_offsets;
  for (const DomainSpec& d : spec.domains) {
    std::vector<double> offset(dim);
    for (double& x : offset) x = d.offset_scale * rng.gaussian();
    domain_offsets.push_back(std::move(offset));
  }

  Benchmark bench;
  bench.spec = spec;
  bench.generator_version = kVersion;
  const std::size_t n_domains = spec.domains.size();

  for (std::size_t i = 0; i < spec.genuine.count; ++i) {
    const std::size_t comp = i % spec.genuine.components;
    const std::size_t dom = (i / spec.genuine.components) % n_domains;
    Sample s;
    s.id = detail::padded_id("genuine", i);
    s.label = Label::make_genuine();
    s.domain_tag = spec.domains[dom].tag;
    s.features.resize(dim);
    for (std::size_t k = 0; k < dim; ++k) {
      s.features[k] = genuine_centers[comp][k] +
                      spec.genuine.spread * rng.gaussian() +
                      domain_offsets[dom][k];
    }
    bench.samples.push_back(std::move(s));
  }
  for (std::size_t c = 0; c < spec.attack_classes.size(); ++c) {
    const AttackClassSpec& cls = spec.attack_classes[c];
    const std::string prefix =
        std::string(to_string(cls.pai_type)) + "-" + cls.pai_subtype;
    for (std::size_t i = 0; i < cls.count; ++i) {
      const std::size_t dom = i % n_domains;
      Sample s;
      s.id = detail::padded_id(prefix, i);
      s.label = Label::make_attack(cls.pai_type, cls.pai_subtype);
      s.domain_tag = spec.domains[dom].tag;
      s.features.resize(dim);
      for (std::size_t k = 0; k < dim; ++k) {
        s.features[k] = attack_centers[c][k] + cls.cov_scale * rng.gaussian() +
                        domain_offsets[dom][k];
      }
      bench.samples.push_back(std::move(s));
    }
  }

  // (class, domain) cell -> sample indices, in generation order
  std::map<std::pair<std::string, std::string>, std::vector<std::size_t>>
      cells;
  for (std::size_t i = 0; i < bench.samples.size(); ++i) {
    const Sample& s = bench.samples[i];
    cells[{class_key(s.label), s.domain_tag}].push_back(i);
  }
  for (const auto& [key, members] : cells) {
    const auto counts = detail::apportion(members.size(), spec.splits);
    for (std::size_t j = 0; j < members.size(); ++j) {
      Split split = Split::test;
      if (j < counts[0]) {
        split = Split::train;
      } else if (j < counts[0] + counts[1]) {
        split = Split::dev;
      }
      bench.samples[members[j]].split = split;
    }
  }
  return bench;
}

// Desk-scale default: 8 input dims, two genuine components, all nine
// attack leaves of the taxonomy, three capture domains. High-fidelity
// print/replay and the silicone mask sit closest to the genuine region.
inline BenchmarkSpec grandtest_toy() {
  BenchmarkSpec spec;
  spec.seed = 7;
  spec.input_dim = 8;
  spec.genuine = GenuineSpec{2, 2000, 0.3, 0.2};
  spec.attack_classes = {
      {PaiType::print, "low", 2.4, 0.45, 300},
      {PaiType::print, "medium", 1.7, 0.5, 300},
      {PaiType::print, "high", 1.05, 0.55, 300},
      {PaiType::replay, "low", 2.2, 0.45, 300},
      {PaiType::replay, "medium", 1.6, 0.5, 300},
      {PaiType::replay, "high", 1.0, 0.55, 300},
      {PaiType::mask, "paper", 2.6, 0.5, 300},
      {PaiType::mask, "rigid", 1.8, 0.5, 300},
      {PaiType::mask, "silicone", 1.1, 0.6, 300},
  };
  spec.domains = {{"lab", 0.1}, {"mobile", 0.12}, {"outdoor", 0.15}};
  spec.splits = SplitFractions{0.5, 0.2, 0.3};
  return spec;
}

}  // namespace anomet
