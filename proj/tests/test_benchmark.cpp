#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <map>
#include <set>

#include "anomet/benchmark.hpp"
#include "support/oracles.hpp"

using namespace anomet;

TEST_CASE("generation is a pure function of the spec") {
  const BenchmarkSpec spec = oracles::tiny_benchmark(17);
  const Benchmark a = generate(spec);
  const Benchmark b = generate(spec);
  REQUIRE(a.samples.size() == b.samples.size());
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    CHECK(a.samples[i].id == b.samples[i].id);
    CHECK(a.samples[i].features == b.samples[i].features);
    CHECK(a.samples[i].split == b.samples[i].split);
  }
  BenchmarkSpec other = spec;
  other.seed = 18;
  const Benchmark c = generate(other);
  CHECK(a.samples[0].features != c.samples[0].features);
}

TEST_CASE("generated samples carry valid ids, labels and features") {
  const Benchmark bench = generate(oracles::tiny_benchmark(3));
  REQUIRE(bench.samples.size() == 120 + 3 * 48);
  CHECK(bench.samples[0].id == "genuine-000001");
  std::size_t genuine = 0;
  std::map<std::string, std::size_t> per_class;
  for (const Sample& s : bench.samples) {
    validate_sample(s, 8);
    for (double x : s.features) CHECK(std::isfinite(x));
    if (s.label.is_genuine()) ++genuine;
    ++per_class[class_key(s.label)];
  }
  CHECK(genuine == 120);
  CHECK(per_class.at("print/low") == 48);
  CHECK(per_class.at("replay/medium") == 48);
  CHECK(per_class.at("mask/rigid") == 48);
  // attack ids are prefixed by their leaf
  bool saw_print = false;
  for (const Sample& s : bench.samples) {
    if (s.id == "print-low-000001") saw_print = true;
  }
  CHECK(saw_print);
}

TEST_CASE("splits are stratified per class and domain cell") {
  const Benchmark bench = generate(oracles::tiny_benchmark(5));
  std::map<std::pair<std::string, std::string>, std::vector<Split>> cells;
  for (const Sample& s : bench.samples) {
    cells[{class_key(s.label), s.domain_tag}].push_back(s.split);
  }
  for (const auto& [key, splits] : cells) {
    (void)key;
    // contiguous train block, then dev, then test
    for (std::size_t i = 1; i < splits.size(); ++i) {
      CHECK(static_cast<int>(splits[i]) >= static_cast<int>(splits[i - 1]));
    }
    std::size_t train = 0, dev = 0, test = 0;
    for (Split s : splits) {
      if (s == Split::train) ++train;
      if (s == Split::dev) ++dev;
      if (s == Split::test) ++test;
    }
    const double n = static_cast<double>(splits.size());
    CHECK(std::fabs(static_cast<double>(train) - 0.5 * n) <= 1.0);
    CHECK(std::fabs(static_cast<double>(dev) - 0.2 * n) <= 1.0);
    CHECK(std::fabs(static_cast<double>(test) - 0.3 * n) <= 1.0);
  }
}

TEST_CASE("the shipped toy set has the documented shape") {
  const BenchmarkSpec spec = grandtest_toy();
  const Benchmark bench = generate(spec);
  REQUIRE(bench.samples.size() == 4700);
  std::map<Split, std::size_t> split_counts;
  std::set<std::string> domains;
  std::set<std::string> leaves;
  for (const Sample& s : bench.samples) {
    ++split_counts[s.split];
    domains.insert(s.domain_tag);
    if (s.label.is_attack()) leaves.insert(class_key(s.label));
  }
  CHECK(split_counts[Split::train] == 2350);
  CHECK(split_counts[Split::dev] == 940);
  CHECK(split_counts[Split::test] == 1410);
  CHECK(domains == std::set<std::string>{"lab", "mobile", "outdoor"});
  CHECK(leaves.size() == 9);
}

TEST_CASE("spec validation rejects malformed inputs") {
  BenchmarkSpec spec = oracles::tiny_benchmark(1);
  spec.attack_classes.push_back(spec.attack_classes.front());
  CHECK_THROWS_AS(validate_spec(spec), std::invalid_argument);

  spec = oracles::tiny_benchmark(1);
  spec.domains.push_back(spec.domains.front());
  CHECK_THROWS_AS(validate_spec(spec), std::invalid_argument);

  spec = oracles::tiny_benchmark(1);
  spec.splits.test = 0.4;
  CHECK_THROWS_AS(validate_spec(spec), std::invalid_argument);

  spec = oracles::tiny_benchmark(1);
  spec.attack_classes[0].pai_subtype = "cardboard";
  CHECK_THROWS_AS(validate_spec(spec), std::invalid_argument);

  spec = oracles::tiny_benchmark(1);
  spec.attack_classes.clear();
  CHECK_THROWS_AS(validate_spec(spec), std::invalid_argument);
}
