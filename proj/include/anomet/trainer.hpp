#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "anomet/benchmark.hpp"
#include "anomet/encoder.hpp"
#include "anomet/errors.hpp"
#include "anomet/losses.hpp"
#include "anomet/mining.hpp"
#include "anomet/optimizer.hpp"
#include "anomet/rng.hpp"
#include "anomet/types.hpp"

namespace anomet {

enum class LossKind {
  center,
  contrastive,
  triplet,
  triplet_focal,
  metric_softmax,
  anomaly
};

inline const char* to_string(LossKind k) {
  switch (k) {
    case LossKind::center: return "center";
    case LossKind::contrastive: return "contrastive";
    case LossKind::triplet: return "triplet";
    case LossKind::triplet_focal: return "triplet-focal";
    case LossKind::metric_softmax: return "metric-softmax";
    case LossKind::anomaly: return "anomaly";
  }
  throw std::invalid_argument("unknown loss kind");
}

inline LossKind loss_kind_from_string(const std::string& s) {
  if (s == "center") return LossKind::center;
  if (s == "contrastive") return LossKind::contrastive;
  if (s == "triplet") return LossKind::triplet;
  if (s == "triplet-focal") return LossKind::triplet_focal;
  if (s == "metric-softmax") return LossKind::metric_softmax;
  if (s == "anomaly") return LossKind::anomaly;
  throw std::invalid_argument(
      "unknown loss '" + s +
      "' (expected center, contrastive, triplet, triplet-focal, "
      "metric-softmax or anomaly)");
}

struct TrainConfig {
  EncoderConfig encoder;
  LossConfig loss;
  MinerConfig miner;
  LossKind loss_kind = LossKind::anomaly;
  MiningMode mode = MiningMode::anomaly;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t epochs = 100;
  bool early_stop = false;
  std::size_t patience = 10;
  std::uint64_t seed = 7;
};

struct EpochStats {
  std::size_t epoch = 0;
  double mean_batch_loss = 0.0;
  std::size_t batches = 0;
  std::size_t triplets = 0;
  std::size_t fallbacks = 0;
  std::size_t skipped_pairs = 0;
  double dev_metric = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  EncoderParameters params;
  ClassCenters centers;
  std::vector<EpochStats> epochs;
  bool stopped_early = false;
  double best_dev_metric = std::numeric_limits<double>::quiet_NaN();
};

// Optional per-epoch metric on held-out data; lower is better. Drives
// early stopping when TrainConfig::early_stop is set, otherwise the
// value is only logged.
using DevMetricFn = std::function<double(const EncoderParameters&)>;

namespace detail {

// Stratified pool draw: at least a quarter genuine (never fewer than
// two), topped up from whichever side has samples left. Consumes the
// same number of rng draws regardless of loss or mining mode, so pools
// are comparable across experiment variants sharing a seed.
inline std::vector<std::size_t> draw_pool(
    const std::vector<std::size_t>& genuine,
    const std::vector<std::size_t>& attacks, std::size_t pool_size,
    Rng& rng) {
  const std::size_t n = genuine.size() + attacks.size();
  const std::size_t take = pool_size < n ? pool_size : n;
  std::size_t g_take = (take + 3) / 4;
  if (g_take < 2) g_take = 2;
  if (g_take > genuine.size()) g_take = genuine.size();
  std::size_t a_take = take - g_take;
  if (a_take > attacks.size()) a_take = attacks.size();
  if (g_take + a_take < take) {
    const std::size_t topped = take - a_take;
    g_take = topped < genuine.size() ? topped : genuine.size();
  }
  std::vector<std::size_t> pool;
  pool.reserve(g_take + a_take);
  for (std::size_t k : rng.sample_without_replacement(genuine.size(), g_take)) {
    pool.push_back(genuine[k]);
  }
  for (std::size_t k : rng.sample_without_replacement(attacks.size(), a_take)) {
    pool.push_back(attacks[k]);
  }
  return pool;
}

inline std::string center_class_id(const Label& label, MiningMode mode) {
  if (mode == MiningMode::anomaly) {
    return label.is_genuine() ? "genuine" : "attack";
  }
  return class_key(label);
}

}  // namespace detail

// Mining -> loss -> backward -> momentum step, fully determined by
// (seed, config, samples). Pool selection, parameter init and mining
// draw from independent streams derived from the seed. Loss values are
// logged with their published sum-over-batch semantics; the applied
// gradient is averaged over the mined triplets to keep step sizes
// independent of batch occupancy.
inline TrainResult train(const std::vector<Sample>& train_samples,
                         const TrainConfig& cfg,
                         const DevMetricFn& dev_metric = nullptr) {
  if (cfg.miner.pool_size < 3) {
    throw std::invalid_argument("train: miner pool_size must be at least 3");
  }
  if (train_samples.empty()) {
    throw DataError("train: empty training split");
  }
  std::vector<std::size_t> genuine;
  std::vector<std::size_t> attacks;
  for (std::size_t i = 0; i < train_samples.size(); ++i) {
    validate_sample(train_samples[i], cfg.encoder.input_dim);
    (train_samples[i].label.is_genuine() ? genuine : attacks).push_back(i);
  }
  if (genuine.size() < 2) {
    throw DataError("train: need at least 2 genuine training samples, got " +
                    std::to_string(genuine.size()));
  }
  if (attacks.empty()) {
    throw DataError("train: training split has no attack samples");
  }

  Rng init_rng(derive_seed(cfg.seed, "init"));
  Rng pool_rng(derive_seed(cfg.seed, "pool"));
  Rng mine_rng(derive_seed(cfg.seed, "mine"));

  TrainResult result;
  result.params = init_encoder(cfg.encoder, init_rng);
  OptimizerState opt =
      init_optimizer(result.params, cfg.learning_rate, cfg.momentum);

  const std::size_t n = train_samples.size();
  const std::size_t steps_per_epoch =
      (n + cfg.miner.pool_size - 1) / cfg.miner.pool_size;

  EncoderParameters best_params = result.params;
  double best_metric = std::numeric_limits<double>::infinity();
  std::size_t epochs_since_best = 0;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochStats stats;
    stats.epoch = epoch;
    double loss_sum = 0.0;
    for (std::size_t step = 0; step < steps_per_epoch; ++step) {
      const std::vector<std::size_t> pool = detail::draw_pool(
          genuine, attacks, cfg.miner.pool_size, pool_rng);

      std::vector<ForwardTrace> traces;
      std::vector<Embedding> embeddings;
      std::vector<Label> labels;
      traces.reserve(pool.size());
      embeddings.reserve(pool.size());
      labels.reserve(pool.size());
      for (std::size_t idx : pool) {
        traces.push_back(
            forward_trace(result.params, train_samples[idx].features));
        embeddings.push_back(traces.back().output);
        labels.push_back(train_samples[idx].label);
      }

      const MinedBatch batch =
          cfg.mode == MiningMode::anomaly
              ? mine_batch(embeddings, labels, cfg.miner, mine_rng)
              : mine_batch_classwise(embeddings, labels, cfg.miner, mine_rng);
      stats.fallbacks += batch.stats.fallback_count;
      stats.skipped_pairs += batch.stats.skipped_pairs;
      if (batch.triplets.empty()) continue;

      // pool position -> accumulated dL/d(embedding)
      std::map<std::size_t, std::vector<double>> pool_grads;
      double batch_loss = 0.0;
      const auto add_grad = [&](std::size_t pool_pos,
                                const std::vector<double>& g) {
        auto [it, inserted] = pool_grads.try_emplace(
            pool_pos, std::vector<double>(g.size(), 0.0));
        for (std::size_t i = 0; i < g.size(); ++i) it->second[i] += g[i];
      };

      if (cfg.loss_kind == LossKind::center) {
        std::vector<std::size_t> members;
        std::vector<Embedding> batch_embs;
        std::vector<std::string> class_ids;
        std::map<std::size_t, bool> seen;
        for (const Triplet& t : batch.triplets) {
          for (std::size_t m : {t.anchor, t.positive, t.negative}) {
            if (seen.emplace(m, true).second) {
              members.push_back(m);
              batch_embs.push_back(embeddings[m]);
              class_ids.push_back(
                  detail::center_class_id(labels[m], cfg.mode));
            }
          }
        }
        for (std::size_t k = 0; k < members.size(); ++k) {
          if (!result.centers.centers.count(class_ids[k])) {
            // cold start: a first-seen class adopts this batch's mean
            std::vector<double> mean(batch_embs[k].dim(), 0.0);
            std::size_t count = 0;
            for (std::size_t j = 0; j < members.size(); ++j) {
              if (class_ids[j] != class_ids[k]) continue;
              for (std::size_t i = 0; i < mean.size(); ++i) {
                mean[i] += batch_embs[j][i];
              }
              ++count;
            }
            for (double& v : mean) v /= static_cast<double>(count);
            result.centers.centers.emplace(class_ids[k], std::move(mean));
          }
        }
        const LossOutput lo = center_loss(batch_embs, class_ids,
                                          result.centers);
        batch_loss = lo.value;
        for (std::size_t k = 0; k < members.size(); ++k) {
          add_grad(members[k], lo.gradients[k]);
        }
        update_centers(result.centers, batch_embs, class_ids);
      } else if (cfg.loss_kind == LossKind::contrastive) {
        std::vector<Embedding> flat;
        std::vector<bool> same;
        for (const Triplet& t : batch.triplets) {
          flat.push_back(embeddings[t.anchor]);
          flat.push_back(embeddings[t.positive]);
          same.push_back(true);
          flat.push_back(embeddings[t.anchor]);
          flat.push_back(embeddings[t.negative]);
          same.push_back(false);
        }
        const LossOutput lo = contrastive_loss(flat, same, cfg.loss);
        batch_loss = lo.value;
        std::size_t pos = 0;
        for (const Triplet& t : batch.triplets) {
          add_grad(t.anchor, lo.gradients[pos]);
          add_grad(t.positive, lo.gradients[pos + 1]);
          add_grad(t.anchor, lo.gradients[pos + 2]);
          add_grad(t.negative, lo.gradients[pos + 3]);
          pos += 4;
        }
      } else {
        std::vector<Embedding> flat;
        flat.reserve(3 * batch.triplets.size());
        for (const Triplet& t : batch.triplets) {
          flat.push_back(embeddings[t.anchor]);
          flat.push_back(embeddings[t.positive]);
          flat.push_back(embeddings[t.negative]);
        }
        LossOutput lo;
        switch (cfg.loss_kind) {
          case LossKind::triplet:
            lo = triplet_loss(flat, cfg.loss);
            break;
          case LossKind::triplet_focal:
            lo = triplet_focal_loss(flat, cfg.loss);
            break;
          case LossKind::metric_softmax:
            lo = metric_softmax_loss(flat, cfg.loss);
            break;
          default:
            lo = anomaly_loss(flat, cfg.loss);
            break;
        }
        batch_loss = lo.value;
        std::size_t pos = 0;
        for (const Triplet& t : batch.triplets) {
          add_grad(t.anchor, lo.gradients[pos]);
          add_grad(t.positive, lo.gradients[pos + 1]);
          add_grad(t.negative, lo.gradients[pos + 2]);
          pos += 3;
        }
      }

      if (!std::isfinite(batch_loss)) {
        throw NumericalError("train: non-finite loss at epoch " +
                             std::to_string(epoch) + ", step " +
                             std::to_string(step + 1));
      }
      loss_sum += batch_loss;
      ++stats.batches;
      stats.triplets += batch.triplets.size();

      const double scale = 1.0 / static_cast<double>(batch.triplets.size());
      std::vector<ForwardTrace> member_traces;
      std::vector<std::vector<double>> member_grads;
      for (auto& [pool_pos, g] : pool_grads) {
        for (double& v : g) v *= scale;
        member_traces.push_back(traces[pool_pos]);
        member_grads.push_back(std::move(g));
      }
      const EncoderGradients eg =
          backward(result.params, member_traces, member_grads);
      sgd_momentum_step(result.params, eg, opt);
    }
    stats.mean_batch_loss =
        stats.batches > 0 ? loss_sum / static_cast<double>(stats.batches)
                          : 0.0;

    // probe batch: normalization must still hold on live parameters
    for (std::size_t i = 0; i < n && i < 4; ++i) {
      const Embedding probe = forward(result.params,
                                      train_samples[i].features);
      if (!is_unit_norm(probe)) {
        throw NumericalError("train: probe embedding lost unit norm at epoch " +
                             std::to_string(epoch));
      }
    }

    if (dev_metric) {
      stats.dev_metric = dev_metric(result.params);
      if (stats.dev_metric < best_metric) {
        best_metric = stats.dev_metric;
        best_params = result.params;
        epochs_since_best = 0;
      } else {
        ++epochs_since_best;
      }
    }
    result.epochs.push_back(stats);

    if (cfg.early_stop && dev_metric && epochs_since_best >= cfg.patience) {
      result.stopped_early = true;
      break;
    }
  }

  if (cfg.early_stop && dev_metric &&
      best_metric < std::numeric_limits<double>::infinity()) {
    result.params = best_params;
    result.best_dev_metric = best_metric;
  } else if (dev_metric && !result.epochs.empty()) {
    result.best_dev_metric = best_metric;
  }
  return result;
}

inline TrainResult train(const Benchmark& benchmark, const TrainConfig& cfg,
                         const DevMetricFn& dev_metric = nullptr) {
  std::vector<Sample> train_samples;
  for (const Sample& s : benchmark.samples) {
    if (s.split == Split::train) train_samples.push_back(s);
  }
  return train(train_samples, cfg, dev_metric);
}

}  // namespace anomet
