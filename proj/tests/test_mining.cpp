#include <catch2/catch_amalgamated.hpp>
#include <cmath>
#include <map>

#include "anomet/mining.hpp"
#include "anomet/rng.hpp"
#include "support/oracles.hpp"

using namespace anomet;

namespace {

std::vector<Label> one_class_labels(std::size_t genuine, std::size_t attacks) {
  std::vector<Label> labels;
  for (std::size_t i = 0; i < genuine; ++i) labels.push_back(Label::make_genuine());
  for (std::size_t i = 0; i < attacks; ++i) {
    labels.push_back(Label::make_attack(PaiType::print, "low"));
  }
  return labels;
}

}  // namespace

TEST_CASE("mined triplets keep genuine anchors and the semi-hard band") {
  Rng data_rng(55);
  Rng mine_rng(56);
  MinerConfig config;
  config.triplets_per_batch = 8;
  for (int batch_id = 0; batch_id < 300; ++batch_id) {
    std::vector<Embedding> pool;
    for (int i = 0; i < 24; ++i) pool.push_back(oracles::random_unit(data_rng, 5));
    const std::vector<Label> labels = one_class_labels(10, 14);
    const MinedBatch batch = mine_batch(pool, labels, config, mine_rng);
    CHECK(batch.triplets.size() == config.triplets_per_batch);
    REQUIRE(batch.used_fallback.size() == batch.triplets.size());
    for (std::size_t t = 0; t < batch.triplets.size(); ++t) {
      const Triplet& tr = batch.triplets[t];
      CHECK(labels[tr.anchor].is_genuine());
      CHECK(labels[tr.positive].is_genuine());
      CHECK(labels[tr.negative].is_attack());
      CHECK(tr.anchor != tr.positive);
      if (!batch.used_fallback[t]) {
        const double d_ap =
            squared_distance(pool[tr.anchor], pool[tr.positive]);
        const double d_an =
            squared_distance(pool[tr.anchor], pool[tr.negative]);
        CHECK(d_ap - d_an < config.margin);
      }
    }
    CHECK(batch.stats.emitted == batch.triplets.size());
  }
}

TEST_CASE("pairs are distinct when enough ordered pairs exist") {
  Rng data_rng(77);
  Rng mine_rng(78);
  MinerConfig config;
  config.triplets_per_batch = 12;
  std::vector<Embedding> pool;
  for (int i = 0; i < 20; ++i) pool.push_back(oracles::random_unit(data_rng, 5));
  const std::vector<Label> labels = one_class_labels(6, 14);  // 30 pairs
  for (int rep = 0; rep < 50; ++rep) {
    const MinedBatch batch = mine_batch(pool, labels, config, mine_rng);
    std::map<std::pair<std::size_t, std::size_t>, int> seen;
    for (const Triplet& t : batch.triplets) {
      ++seen[{t.anchor, t.positive}];
    }
    for (const auto& [pair, count] : seen) {
      (void)pair;
      CHECK(count == 1);
    }
  }
}

TEST_CASE("an empty semi-hard set falls back or skips as configured") {
  // the positive is antipodal while every attack sits nearer the
  // anchor than the margin allows, so no negative satisfies the band
  std::vector<Embedding> pool = {
      oracles::unit({1.0, 0.0, 0.0}),
      oracles::unit({-1.0, 0.0, 0.0}),
      oracles::unit({0.0, 1.0, 0.0}),
      oracles::unit({0.0, 0.8, 0.6}),
  };
  const std::vector<Label> labels = one_class_labels(2, 2);
  MinerConfig config;
  config.triplets_per_batch = 2;

  config.fallback = MiningFallback::skip_pair;
  Rng rng_a(5);
  const MinedBatch skipped = mine_batch(pool, labels, config, rng_a);
  CHECK(skipped.triplets.empty());
  CHECK(skipped.stats.skipped_pairs == 2);

  config.fallback = MiningFallback::hardest_negative;
  Rng rng_b(5);
  const MinedBatch forced = mine_batch(pool, labels, config, rng_b);
  REQUIRE(forced.triplets.size() == 2);
  CHECK(forced.stats.fallback_count == 2);
  for (std::size_t t = 0; t < forced.triplets.size(); ++t) {
    CHECK(forced.used_fallback[t]);
    // the fallback picks the closest attack to the anchor
    const Triplet& tr = forced.triplets[t];
    double best = 1e9;
    std::size_t best_i = 0;
    for (std::size_t n = 2; n < pool.size(); ++n) {
      const double d = squared_distance(pool[tr.anchor], pool[n]);
      if (d < best) {
        best = d;
        best_i = n;
      }
    }
    CHECK(tr.negative == best_i);
  }
}

TEST_CASE("negative choice is uniform over the satisfying set") {
  // a tight genuine pair makes every attack satisfy the band, so each
  // draw should be uniform over all eight attacks
  std::vector<Embedding> pool = {
      oracles::unit({1.0, 0.0, 0.0, 0.0}),
      oracles::unit({1.0, 0.05, 0.0, 0.0}),
  };
  Rng data_rng(91);
  const std::size_t attack_count = 8;
  for (std::size_t i = 0; i < attack_count; ++i) {
    pool.push_back(oracles::random_unit(data_rng, 4));
  }
  const std::vector<Label> labels = one_class_labels(2, attack_count);
  MinerConfig config;
  config.triplets_per_batch = 1;

  Rng mine_rng(92);
  std::map<std::size_t, std::size_t> counts;
  const std::size_t draws = 4000;
  for (std::size_t i = 0; i < draws; ++i) {
    const MinedBatch batch = mine_batch(pool, labels, config, mine_rng);
    REQUIRE(batch.triplets.size() == 1);
    REQUIRE_FALSE(batch.used_fallback[0]);
    ++counts[batch.triplets[0].negative];
  }
  CHECK(oracles::within_3sigma_uniform(counts, attack_count, draws));
}

TEST_CASE("mining rejects unusable pools") {
  Rng rng(1);
  std::vector<Embedding> pool = {oracles::unit({1.0, 0.0}),
                                 oracles::unit({0.0, 1.0})};
  MinerConfig config;
  CHECK_THROWS_AS(
      mine_batch(pool, one_class_labels(1, 1), config, rng), DataError);
  CHECK_THROWS_AS(
      mine_batch(pool, one_class_labels(2, 0), config, rng), DataError);
}

TEST_CASE("classwise mining pairs within a class and crosses for negatives") {
  Rng data_rng(33);
  Rng mine_rng(34);
  std::vector<Embedding> pool;
  std::vector<Label> labels;
  for (int i = 0; i < 6; ++i) {
    pool.push_back(oracles::random_unit(data_rng, 5));
    labels.push_back(Label::make_genuine());
  }
  for (int i = 0; i < 5; ++i) {
    pool.push_back(oracles::random_unit(data_rng, 5));
    labels.push_back(Label::make_attack(PaiType::print, "low"));
  }
  // a singleton class can only ever serve as a negative
  pool.push_back(oracles::random_unit(data_rng, 5));
  labels.push_back(Label::make_attack(PaiType::mask, "rigid"));

  MinerConfig config;
  config.triplets_per_batch = 10;
  for (int rep = 0; rep < 100; ++rep) {
    const MinedBatch batch =
        mine_batch_classwise(pool, labels, config, mine_rng);
    for (const Triplet& t : batch.triplets) {
      CHECK(class_key(labels[t.anchor]) == class_key(labels[t.positive]));
      CHECK(class_key(labels[t.anchor]) != class_key(labels[t.negative]));
      CHECK(t.anchor != t.positive);
      CHECK(class_key(labels[t.anchor]) != "mask/rigid");
    }
  }
}

TEST_CASE("classwise mining needs a pairable class and a second class") {
  Rng rng(2);
  std::vector<Embedding> pool = {oracles::unit({1.0, 0.0}),
                                 oracles::unit({0.0, 1.0})};
  std::vector<Label> labels = {Label::make_genuine(),
                               Label::make_attack(PaiType::print, "low")};
  MinerConfig config;
  // two singleton classes: nothing can anchor
  CHECK_THROWS_AS(mine_batch_classwise(pool, labels, config, rng), DataError);
  // one pairable class but no second class
  labels = {Label::make_genuine(), Label::make_genuine()};
  CHECK_THROWS_AS(mine_batch_classwise(pool, labels, config, rng), DataError);
}
