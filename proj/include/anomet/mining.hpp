#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "anomet/distance.hpp"
#include "anomet/encoder.hpp"
#include "anomet/errors.hpp"
#include "anomet/rng.hpp"
#include "anomet/types.hpp"

namespace anomet {

// What to do with an anchor-positive pair when no negative satisfies the
// semi-hard criterion.
enum class MiningFallback { skip_pair, hardest_negative };

enum class MiningMode { anomaly, classwise };

inline const char* to_string(MiningMode m) {
  return m == MiningMode::anomaly ? "anomaly" : "classwise";
}

inline MiningMode mining_mode_from_string(const std::string& s) {
  if (s == "anomaly") return MiningMode::anomaly;
  if (s == "classwise") return MiningMode::classwise;
  throw std::invalid_argument("unknown mining mode '" + s +
                              "' (expected anomaly or classwise)");
}

struct MinerConfig {
  std::size_t pool_size = 128;
  std::size_t triplets_per_batch = 12;
  double margin = 0.2;
  MiningFallback fallback = MiningFallback::hardest_negative;
};

struct MiningStats {
  std::size_t emitted = 0;
  std::size_t fallback_count = 0;
  std::size_t skipped_pairs = 0;
  double mean_d_ap = 0.0;
  double mean_d_an = 0.0;
  // pool index of the chosen negative -> times chosen
  std::map<std::size_t, std::size_t> negative_counts;
};

struct MinedBatch {
  std::vector<Triplet> triplets;  // indices into the pool
  std::vector<bool> used_fallback;
  MiningStats stats;
};

namespace detail {

// Picks a negative for one anchor-positive pair. Semi-hard criterion:
// d_ap - d_an < margin, i.e. the negative is not already far beyond the
// margin. The pick is uniform over the satisfying set; if that set is
// empty the fallback either takes the overall closest negative or drops
// the pair.
inline bool pick_negative(const std::vector<Embedding>& embeddings,
                          const std::vector<std::size_t>& negative_pool,
                          const Embedding& anchor, double d_ap,
                          const MinerConfig& config, Rng& rng,
                          std::size_t& chosen, bool& fallback_used) {
  std::vector<std::size_t> satisfying;
  std::size_t hardest = negative_pool.front();
  double hardest_d = squared_distance(anchor, embeddings[hardest]);
  for (std::size_t n : negative_pool) {
    const double d_an = squared_distance(anchor, embeddings[n]);
    if (d_ap - d_an < config.margin) satisfying.push_back(n);
    if (d_an < hardest_d) {
      hardest_d = d_an;
      hardest = n;
    }
  }
  if (!satisfying.empty()) {
    chosen = satisfying[rng.index(satisfying.size())];
    fallback_used = false;
    return true;
  }
  if (config.fallback == MiningFallback::hardest_negative) {
    chosen = hardest;
    fallback_used = true;
    return true;
  }
  return false;
}

inline void finish_stats(MinedBatch& batch,
                         const std::vector<Embedding>& embeddings) {
  double sum_ap = 0.0;
  double sum_an = 0.0;
  for (const Triplet& t : batch.triplets) {
    sum_ap += squared_distance(embeddings[t.anchor], embeddings[t.positive]);
    sum_an += squared_distance(embeddings[t.anchor], embeddings[t.negative]);
    ++batch.stats.negative_counts[t.negative];
  }
  batch.stats.emitted = batch.triplets.size();
  if (!batch.triplets.empty()) {
    batch.stats.mean_d_ap = sum_ap / static_cast<double>(batch.triplets.size());
    batch.stats.mean_d_an = sum_an / static_cast<double>(batch.triplets.size());
  }
}

}  // namespace detail

// One-class mining: anchors and positives are always genuine samples,
// negatives always attacks. When enough distinct genuine ordered pairs
// exist they are sampled without replacement; otherwise pairs are drawn
// independently.
inline MinedBatch mine_batch(const std::vector<Embedding>& embeddings,
                             const std::vector<Label>& labels,
                             const MinerConfig& config, Rng& rng) {
  if (embeddings.size() != labels.size()) {
    throw std::invalid_argument(
        "mine_batch: embedding count does not match label count");
  }
  if (config.triplets_per_batch == 0) {
    throw std::invalid_argument(
        "mine_batch: triplets_per_batch must be positive");
  }
  std::vector<std::size_t> genuine;
  std::vector<std::size_t> attacks;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i].is_genuine() ? genuine : attacks).push_back(i);
  }
  if (genuine.size() < 2) {
    throw DataError("mining pool needs at least 2 genuine samples, got " +
                    std::to_string(genuine.size()));
  }
  if (attacks.empty()) {
    throw DataError("mining pool has no attack samples to use as negatives");
  }

  const std::size_t g = genuine.size();
  const std::size_t pair_count = g * (g - 1);
  MinedBatch batch;

  const auto emit = [&](std::size_t a, std::size_t p) {
    const double d_ap =
        squared_distance(embeddings[a], embeddings[p]);
    std::size_t n = 0;
    bool fb = false;
    if (detail::pick_negative(embeddings, attacks, embeddings[a], d_ap,
                              config, rng, n, fb)) {
      batch.triplets.push_back(Triplet{a, p, n});
      batch.used_fallback.push_back(fb);
      if (fb) ++batch.stats.fallback_count;
    } else {
      ++batch.stats.skipped_pairs;
    }
  };

  if (pair_count >= config.triplets_per_batch) {
    const std::vector<std::size_t> picks =
        rng.sample_without_replacement(pair_count, config.triplets_per_batch);
    for (std::size_t k : picks) {
      const std::size_t ai = k / (g - 1);
      std::size_t pi = k % (g - 1);
      if (pi >= ai) ++pi;
      emit(genuine[ai], genuine[pi]);
    }
  } else {
    for (std::size_t t = 0; t < config.triplets_per_batch; ++t) {
      const std::size_t ai = rng.index(g);
      std::size_t pi = rng.index(g - 1);
      if (pi >= ai) ++pi;
      emit(genuine[ai], genuine[pi]);
    }
  }
  detail::finish_stats(batch, embeddings);
  return batch;
}

// Classwise mining: the anchor-positive pair comes from one class
// (uniform over classes with at least two members, then a uniform
// ordered pair inside it) and negatives from all other classes, under
// the same semi-hard criterion.
inline MinedBatch mine_batch_classwise(const std::vector<Embedding>& embeddings,
                                       const std::vector<Label>& labels,
                                       const MinerConfig& config, Rng& rng) {
  if (embeddings.size() != labels.size()) {
    throw std::invalid_argument(
        "mine_batch_classwise: embedding count does not match label count");
  }
  if (config.triplets_per_batch == 0) {
    throw std::invalid_argument(
        "mine_batch_classwise: triplets_per_batch must be positive");
  }
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[class_key(labels[i])].push_back(i);
  }
  std::vector<const std::vector<std::size_t>*> pair_classes;
  std::vector<std::string> pair_class_keys;
  for (const auto& [key, members] : by_class) {
    if (members.size() >= 2) {
      pair_classes.push_back(&members);
      pair_class_keys.push_back(key);
    }
  }
  if (pair_classes.empty()) {
    throw DataError(
        "classwise mining needs at least one class with 2 or more samples");
  }
  if (by_class.size() < 2) {
    throw DataError(
        "classwise mining needs at least 2 distinct classes, got " +
        std::to_string(by_class.size()));
  }

  MinedBatch batch;
  for (std::size_t t = 0; t < config.triplets_per_batch; ++t) {
    const std::size_t ci = rng.index(pair_classes.size());
    const std::vector<std::size_t>& members = *pair_classes[ci];
    const std::size_t ai = rng.index(members.size());
    std::size_t pi = rng.index(members.size() - 1);
    if (pi >= ai) ++pi;
    const std::size_t a = members[ai];
    const std::size_t p = members[pi];

    std::vector<std::size_t> negatives;
    for (const auto& [key, other] : by_class) {
      if (key == pair_class_keys[ci]) continue;
      negatives.insert(negatives.end(), other.begin(), other.end());
    }
    const double d_ap = squared_distance(embeddings[a], embeddings[p]);
    std::size_t n = 0;
    bool fb = false;
    if (detail::pick_negative(embeddings, negatives, embeddings[a], d_ap,
                              config, rng, n, fb)) {
      batch.triplets.push_back(Triplet{a, p, n});
      batch.used_fallback.push_back(fb);
      if (fb) ++batch.stats.fallback_count;
    } else {
      ++batch.stats.skipped_pairs;
    }
  }
  detail::finish_stats(batch, embeddings);
  return batch;
}

// Convenience overloads that embed a pool of samples first.
inline MinedBatch mine_batch(const EncoderParameters& params,
                             const std::vector<Sample>& pool,
                             const MinerConfig& config, Rng& rng,
                             MiningMode mode = MiningMode::anomaly) {
  std::vector<Embedding> embeddings;
  std::vector<Label> labels;
  embeddings.reserve(pool.size());
  labels.reserve(pool.size());
  for (const Sample& s : pool) {
    embeddings.push_back(forward(params, s.features));
    labels.push_back(s.label);
  }
  return mode == MiningMode::anomaly
             ? mine_batch(embeddings, labels, config, rng)
             : mine_batch_classwise(embeddings, labels, config, rng);
}

}  // namespace anomet
