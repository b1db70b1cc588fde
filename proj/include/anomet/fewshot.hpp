#pragma once

#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "anomet/distance.hpp"
#include "anomet/encoder.hpp"
#include "anomet/errors.hpp"
#include "anomet/losses.hpp"
#include "anomet/rng.hpp"
#include "anomet/types.hpp"

namespace anomet {

// The chosen reference samples, before embedding. Keeping the selection
// separate lets a training loop re-embed the same references as the
// encoder moves.
struct ReferenceSelection {
  std::vector<Sample> genuine;
  std::vector<Sample> attacks;
};

// M genuine and M attack reference embeddings; pair i is
// (genuine[i], attacks[i]).
struct ReferenceSets {
  std::vector<Embedding> genuine;
  std::vector<Embedding> attacks;
  std::vector<std::string> genuine_ids;
  std::vector<std::string> attack_ids;
  std::vector<Label> attack_labels;
  std::size_t pair_count = 0;
};

// Draws M genuine references uniformly without replacement and M attack
// references by round-robin over attack type, then over domain within
// each type, each bucket pre-shuffled. The rotation spreads the few
// attack references over as many attack kinds and domains as possible.
inline ReferenceSelection select_reference_samples(
    const std::vector<Sample>& candidates, std::size_t m, Rng& rng) {
  if (m == 0) {
    throw std::invalid_argument(
        "select_reference_samples: m must be positive");
  }
  std::vector<std::size_t> genuine;
  std::vector<std::size_t> attacks;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    (candidates[i].label.is_genuine() ? genuine : attacks).push_back(i);
  }
  if (genuine.size() < m) {
    throw DataError("building reference sets requires " + std::to_string(m) +
                    " genuine samples, got " + std::to_string(genuine.size()));
  }
  if (attacks.size() < m) {
    throw DataError("building reference sets requires " + std::to_string(m) +
                    " attack samples, got " + std::to_string(attacks.size()));
  }

  ReferenceSelection selection;
  for (std::size_t k : rng.sample_without_replacement(genuine.size(), m)) {
    selection.genuine.push_back(candidates[genuine[k]]);
  }

  // type index -> domain tag -> shuffled bucket of candidate indices
  std::map<int, std::map<std::string, std::vector<std::size_t>>> buckets;
  for (std::size_t i : attacks) {
    const Sample& s = candidates[i];
    buckets[static_cast<int>(*s.label.pai_type)][s.domain_tag].push_back(i);
  }
  for (auto& [type, domains] : buckets) {
    for (auto& [tag, bucket] : domains) rng.shuffle(bucket);
  }

  std::map<int, std::size_t> domain_cursor;
  std::vector<int> type_order;
  for (const auto& [type, domains] : buckets) type_order.push_back(type);
  std::size_t type_cursor = 0;
  while (selection.attacks.size() < m) {
    bool advanced = false;
    for (std::size_t step = 0; step < type_order.size(); ++step) {
      auto& domains = buckets[type_order[type_cursor]];
      std::vector<std::string> tags;
      for (const auto& [tag, bucket] : domains) {
        if (!bucket.empty()) tags.push_back(tag);
      }
      const std::size_t saved_type = type_cursor;
      type_cursor = (type_cursor + 1) % type_order.size();
      if (tags.empty()) continue;
      std::size_t& cursor = domain_cursor[type_order[saved_type]];
      const std::string& tag = tags[cursor % tags.size()];
      ++cursor;
      std::vector<std::size_t>& bucket = domains[tag];
      selection.attacks.push_back(candidates[bucket.back()]);
      bucket.pop_back();
      advanced = true;
      break;
    }
    if (!advanced) {
      throw DataError("reference set rotation exhausted the attack samples");
    }
  }
  return selection;
}

inline ReferenceSets embed_references(const EncoderParameters& params,
                                      const ReferenceSelection& selection) {
  if (selection.genuine.empty() ||
      selection.genuine.size() != selection.attacks.size()) {
    throw std::invalid_argument(
        "embed_references: selection must pair genuine and attack samples");
  }
  ReferenceSets refs;
  refs.pair_count = selection.genuine.size();
  for (const Sample& s : selection.genuine) {
    refs.genuine.push_back(forward(params, s.features));
    refs.genuine_ids.push_back(s.id);
  }
  for (const Sample& s : selection.attacks) {
    refs.attacks.push_back(forward(params, s.features));
    refs.attack_ids.push_back(s.id);
    refs.attack_labels.push_back(s.label);
  }
  return refs;
}

inline ReferenceSets build_reference_sets(const EncoderParameters& params,
                                          const std::vector<Sample>& candidates,
                                          std::size_t m, Rng& rng) {
  return embed_references(params,
                          select_reference_samples(candidates, m, rng));
}

struct PosteriorScore {
  double normalized = 0.0;  // raw divided by the pair count
  double raw = 0.0;         // sum of the per-pair terms
};

// Per-pair term: corrected orientation scores sigmoid(d_attack -
// d_genuine), so proximity to the genuine reference raises the score;
// paper_literal keeps the published argument order, which flips it.
inline PosteriorScore posterior_from_distances(
    const std::vector<double>& d_genuine, const std::vector<double>& d_attack,
    SoftmaxSign sign) {
  if (d_genuine.empty() || d_genuine.size() != d_attack.size()) {
    throw std::invalid_argument(
        "posterior_from_distances: need equal, non-empty distance lists");
  }
  PosteriorScore score;
  for (std::size_t i = 0; i < d_genuine.size(); ++i) {
    const double x = sign == SoftmaxSign::corrected
                         ? d_attack[i] - d_genuine[i]
                         : d_genuine[i] - d_attack[i];
    score.raw += stable_sigmoid(x);
  }
  score.normalized = score.raw / static_cast<double>(d_genuine.size());
  return score;
}

inline PosteriorScore posterior_score(const Embedding& embedding,
                                      const ReferenceSets& refs,
                                      SoftmaxSign sign) {
  if (refs.pair_count == 0 || refs.genuine.size() != refs.pair_count ||
      refs.attacks.size() != refs.pair_count) {
    throw std::invalid_argument(
        "posterior_score: reference sets are incomplete");
  }
  std::vector<double> d_genuine(refs.pair_count);
  std::vector<double> d_attack(refs.pair_count);
  for (std::size_t i = 0; i < refs.pair_count; ++i) {
    d_genuine[i] = squared_distance(embedding, refs.genuine[i]);
    d_attack[i] = squared_distance(embedding, refs.attacks[i]);
  }
  return posterior_from_distances(d_genuine, d_attack, sign);
}

struct ScoredSample {
  std::string id;
  double score = 0.0;  // normalized posterior
  double raw = 0.0;
  Label label;
};

inline std::vector<ScoredSample> score_split(const EncoderParameters& params,
                                             const std::vector<Sample>& samples,
                                             const ReferenceSets& refs,
                                             SoftmaxSign sign) {
  std::vector<ScoredSample> out;
  out.reserve(samples.size());
  for (const Sample& s : samples) {
    const PosteriorScore p = posterior_score(forward(params, s.features),
                                             refs, sign);
    out.push_back(ScoredSample{s.id, p.normalized, p.raw, s.label});
  }
  return out;
}

}  // namespace anomet
