#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "anomet/errors.hpp"
#include "anomet/types.hpp"

namespace anomet {

struct ScoreEntry {
  std::string id;
  double score = 0.0;
  Label label;
};

// A scored split. higher_is_genuine says which direction of the score
// axis means "genuine"; every metric below respects it.
struct ScoreSet {
  std::vector<ScoreEntry> entries;
  bool higher_is_genuine = true;
};

struct Rates {
  double far = 0.0;  // attacks accepted
  double frr = 0.0;  // genuine rejected
};

namespace detail {

inline void check_two_class(const ScoreSet& scores, const char* where) {
  std::size_t genuine = 0;
  std::size_t attacks = 0;
  for (const ScoreEntry& e : scores.entries) {
    if (!std::isfinite(e.score)) {
      throw DataError(std::string(where) + ": non-finite score for id '" +
                      e.id + "'");
    }
    if (e.label.is_genuine()) {
      ++genuine;
    } else {
      ++attacks;
    }
  }
  if (genuine == 0 || attacks == 0) {
    throw DataError(std::string(where) +
                    ": score set must contain both classes (genuine=" +
                    std::to_string(genuine) + ", attacks=" +
                    std::to_string(attacks) + ")");
  }
}

inline bool accepted(const ScoreSet& scores, double score, double tau) {
  // Ties accept in either orientation.
  return scores.higher_is_genuine ? score >= tau : score <= tau;
}

}  // namespace detail

// FAR and FRR at a fixed threshold. A sample is accepted as genuine when
// its score reaches tau (ties accept); for lower-is-genuine sets the
// comparison flips.
inline Rates rates_at_threshold(const ScoreSet& scores, double tau) {
  detail::check_two_class(scores, "rates_at_threshold");
  std::size_t genuine = 0;
  std::size_t attacks = 0;
  std::size_t rejected_genuine = 0;
  std::size_t accepted_attacks = 0;
  for (const ScoreEntry& e : scores.entries) {
    const bool accept = detail::accepted(scores, e.score, tau);
    if (e.label.is_genuine()) {
      ++genuine;
      if (!accept) ++rejected_genuine;
    } else {
      ++attacks;
      if (accept) ++accepted_attacks;
    }
  }
  Rates r;
  r.far = static_cast<double>(accepted_attacks) / static_cast<double>(attacks);
  r.frr = static_cast<double>(rejected_genuine) / static_cast<double>(genuine);
  return r;
}

struct EerResult {
  double threshold = 0.0;
  double eer = 0.0;
  double far = 0.0;
  double frr = 0.0;
};

// Sweeps midpoints between adjacent distinct scores plus one sentinel
// beyond each end (standing in for the infinite thresholds) and keeps
// the threshold with the smallest |FAR - FRR|, breaking ties toward
// smaller FAR + FRR and then toward the smaller threshold.
inline EerResult eer_threshold(const ScoreSet& scores) {
  detail::check_two_class(scores, "eer_threshold");
  std::vector<double> values;
  values.reserve(scores.entries.size());
  for (const ScoreEntry& e : scores.entries) values.push_back(e.score);
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());

  std::vector<double> candidates;
  candidates.push_back(values.front() - 1.0);
  for (std::size_t i = 0; i + 1 < values.size(); ++i) {
    candidates.push_back(values[i] + 0.5 * (values[i + 1] - values[i]));
  }
  candidates.push_back(values.back() + 1.0);

  EerResult best;
  bool have_best = false;
  for (double tau : candidates) {
    const Rates r = rates_at_threshold(scores, tau);
    const double gap = std::fabs(r.far - r.frr);
    const double total = r.far + r.frr;
    if (!have_best) {
      have_best = true;
    } else {
      const double best_gap = std::fabs(best.far - best.frr);
      const double best_total = best.far + best.frr;
      if (gap > best_gap) continue;
      if (gap == best_gap) {
        if (total > best_total) continue;
        if (total == best_total && tau >= best.threshold) continue;
      }
    }
    best.threshold = tau;
    best.far = r.far;
    best.frr = r.frr;
  }
  best.eer = (best.far + best.frr) / 2.0;
  return best;
}

struct PadReportOptions {
  // Also break APCER out per pai_type/pai_subtype leaf; requires every
  // test attack to carry a subtype.
  bool subtype_apcer = false;
};

struct EvalReport {
  bool higher_is_genuine = true;
  double threshold = 0.0;  // fixed on dev at its EER

  double dev_far = 0.0;
  double dev_frr = 0.0;
  double dev_eer = 0.0;
  double aer = 0.0;  // (dev FAR + dev FRR)/2 at the threshold

  double far = 0.0;  // test, at the dev threshold
  double frr = 0.0;
  double hter = 0.0;

  std::map<std::string, double> apcer;  // per pai_type
  std::map<std::string, double> apcer_subtype;
  double apcer_max = 0.0;
  double bpcer = 0.0;
  double acer = 0.0;

  // Per true class, fractions [sided genuine, sided attack] at the
  // threshold. Rows: "genuine" plus each attack type present in test.
  std::map<std::string, std::array<double, 2>> threshold_confusion;

  // Nearest-prototype confusion; filled only by pipelines that have
  // embeddings to assign. Rows are true classes present in test,
  // columns the classes with a prototype, entries row-normalized. A
  // held-out attack type appears as a row with no matching column.
  std::vector<std::string> prototype_rows;
  std::vector<std::string> prototype_classes;
  std::vector<std::vector<double>> prototype_confusion;
};

// Full report: threshold fixed on dev at EER, every test metric measured
// at that fixed threshold.
inline EvalReport pad_report(const ScoreSet& dev, const ScoreSet& test,
                             const PadReportOptions& options = {}) {
  if (dev.higher_is_genuine != test.higher_is_genuine) {
    throw DataError("pad_report: dev and test score orientations differ");
  }
  detail::check_two_class(dev, "pad_report(dev)");
  detail::check_two_class(test, "pad_report(test)");
  for (const ScoreEntry& e : test.entries) {
    if (e.label.is_attack() && !e.label.pai_type) {
      throw DataError("pad_report: test attack '" + e.id +
                      "' is missing its pai_type");
    }
    if (options.subtype_apcer && e.label.is_attack() && !e.label.pai_subtype) {
      throw DataError("pad_report: test attack '" + e.id +
                      "' is missing its pai_subtype");
    }
  }

  EvalReport report;
  report.higher_is_genuine = dev.higher_is_genuine;
  const EerResult dev_eer = eer_threshold(dev);
  report.threshold = dev_eer.threshold;
  report.dev_far = dev_eer.far;
  report.dev_frr = dev_eer.frr;
  report.dev_eer = dev_eer.eer;
  report.aer = (dev_eer.far + dev_eer.frr) / 2.0;

  const Rates test_rates = rates_at_threshold(test, report.threshold);
  report.far = test_rates.far;
  report.frr = test_rates.frr;
  report.hter = (test_rates.far + test_rates.frr) / 2.0;
  report.bpcer = test_rates.frr;

  std::map<std::string, std::pair<std::size_t, std::size_t>> type_counts;
  std::map<std::string, std::pair<std::size_t, std::size_t>> subtype_counts;
  std::map<std::string, std::pair<std::size_t, std::size_t>> confusion_counts;
  for (const ScoreEntry& e : test.entries) {
    const bool accept = detail::accepted(test, e.score, report.threshold);
    if (e.label.is_genuine()) {
      auto& [sided_genuine, total] = confusion_counts["genuine"];
      if (accept) ++sided_genuine;
      ++total;
      continue;
    }
    const std::string type = to_string(*e.label.pai_type);
    auto& [type_accepted, type_total] = type_counts[type];
    if (accept) ++type_accepted;
    ++type_total;
    auto& [sided_genuine, total] = confusion_counts[type];
    if (accept) ++sided_genuine;
    ++total;
    if (options.subtype_apcer) {
      auto& [sub_accepted, sub_total] =
          subtype_counts[type + "/" + *e.label.pai_subtype];
      if (accept) ++sub_accepted;
      ++sub_total;
    }
  }
  for (const auto& [type, counts] : type_counts) {
    report.apcer[type] = static_cast<double>(counts.first) /
                         static_cast<double>(counts.second);
    report.apcer_max = std::max(report.apcer_max, report.apcer[type]);
  }
  for (const auto& [key, counts] : subtype_counts) {
    report.apcer_subtype[key] = static_cast<double>(counts.first) /
                                static_cast<double>(counts.second);
  }
  report.acer = (report.apcer_max + report.bpcer) / 2.0;
  for (const auto& [row, counts] : confusion_counts) {
    const double genuine_frac = static_cast<double>(counts.first) /
                                static_cast<double>(counts.second);
    report.threshold_confusion[row] = {genuine_frac, 1.0 - genuine_frac};
  }
  return report;
}

}  // namespace anomet
