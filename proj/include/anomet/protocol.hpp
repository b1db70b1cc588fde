#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "anomet/benchmark.hpp"
#include "anomet/errors.hpp"
#include "anomet/eval.hpp"
#include "anomet/fewshot.hpp"
#include "anomet/trainer.hpp"
#include "anomet/types.hpp"

namespace anomet {

enum class ProtocolKind { intra, holdout };

inline const char* to_string(ProtocolKind k) {
  return k == ProtocolKind::intra ? "intra" : "holdout";
}

inline ProtocolKind protocol_kind_from_string(const std::string& s) {
  if (s == "intra") return ProtocolKind::intra;
  if (s == "holdout") return ProtocolKind::holdout;
  throw std::invalid_argument("unknown protocol '" + s +
                              "' (expected intra or holdout)");
}

// A whole attack type, or one of its subtypes.
struct PaiSelector {
  PaiType type = PaiType::print;
  std::optional<std::string> subtype;

  bool matches(const Label& label) const {
    if (!label.is_attack() || *label.pai_type != type) return false;
    return !subtype || (label.pai_subtype && *label.pai_subtype == *subtype);
  }
};

inline PaiSelector pai_selector_from_string(const std::string& s) {
  PaiSelector sel;
  const auto slash = s.find('/');
  if (slash == std::string::npos) {
    sel.type = pai_type_from_string(s);
    return sel;
  }
  sel.type = pai_type_from_string(s.substr(0, slash));
  const std::string subtype = s.substr(slash + 1);
  if (!valid_pai_subtype(sel.type, subtype)) {
    throw std::invalid_argument("invalid pai_subtype '" + subtype +
                                "' for pai_type '" + to_string(sel.type) +
                                "'");
  }
  sel.subtype = subtype;
  return sel;
}

inline std::string to_string(const PaiSelector& sel) {
  std::string s = to_string(sel.type);
  if (sel.subtype) s += "/" + *sel.subtype;
  return s;
}

struct ProtocolSpec {
  ProtocolKind kind = ProtocolKind::intra;
  std::optional<std::string> holdout_tag;   // hold out a capture domain
  std::optional<PaiSelector> holdout_pai;   // hold out an attack kind
};

struct SplitView {
  std::vector<Sample> train;
  std::vector<Sample> dev;
  std::vector<Sample> test;
};

// Intra: declared splits as-is. Domain holdout: every sample of the
// held-out domain becomes the test set and vanishes from train/dev.
// Attack holdout: matching attacks from all splits become the test
// attack set, evaluated against the declared test genuine; matching
// samples vanish from train/dev.
inline SplitView apply_protocol_split(const std::vector<Sample>& samples,
                                      const ProtocolSpec& spec) {
  if (spec.kind == ProtocolKind::intra) {
    if (spec.holdout_tag || spec.holdout_pai) {
      throw std::invalid_argument(
          "intra protocol does not take a holdout selector");
    }
  } else {
    if (static_cast<bool>(spec.holdout_tag) ==
        static_cast<bool>(spec.holdout_pai)) {
      throw std::invalid_argument(
          "holdout protocol needs exactly one of holdout_tag or holdout_pai");
    }
  }

  SplitView view;
  if (spec.kind == ProtocolKind::intra) {
    for (const Sample& s : samples) {
      switch (s.split) {
        case Split::train: view.train.push_back(s); break;
        case Split::dev: view.dev.push_back(s); break;
        case Split::test: view.test.push_back(s); break;
      }
    }
  } else if (spec.holdout_tag) {
    bool seen = false;
    for (const Sample& s : samples) {
      if (s.domain_tag == *spec.holdout_tag) {
        seen = true;
        view.test.push_back(s);
      } else if (s.split == Split::train) {
        view.train.push_back(s);
      } else if (s.split == Split::dev) {
        view.dev.push_back(s);
      }
    }
    if (!seen) {
      throw DataError("holdout domain '" + *spec.holdout_tag +
                      "' matches no samples");
    }
  } else {
    bool seen = false;
    for (const Sample& s : samples) {
      if (spec.holdout_pai->matches(s.label)) {
        seen = true;
        view.test.push_back(s);
      } else if (s.split == Split::train) {
        view.train.push_back(s);
      } else if (s.split == Split::dev) {
        view.dev.push_back(s);
      } else if (s.label.is_genuine()) {
        view.test.push_back(s);
      }
    }
    if (!seen) {
      throw DataError("holdout attack '" + to_string(*spec.holdout_pai) +
                      "' matches no samples");
    }
  }

  const auto count = [](const std::vector<Sample>& split, bool genuine) {
    std::size_t c = 0;
    for (const Sample& s : split) {
      if (s.label.is_genuine() == genuine) ++c;
    }
    return c;
  };
  if (count(view.train, true) < 2 || count(view.train, false) == 0) {
    throw DataError(
        "protocol split leaves training without enough genuine samples or "
        "without attacks");
  }
  if (count(view.dev, true) == 0 || count(view.dev, false) == 0) {
    throw DataError("protocol split leaves dev without both classes");
  }
  if (count(view.test, true) == 0 || count(view.test, false) == 0) {
    throw DataError("protocol split leaves test without both classes");
  }
  return view;
}

struct PipelineConfig {
  TrainConfig train;
  std::size_t fewshot_m = 3;
  bool subtype_apcer = false;
};

struct ProtocolResult {
  ProtocolSpec spec;
  SplitView splits;
  TrainResult training;
  ReferenceSelection selection;
  ReferenceSets refs;
  std::vector<ScoredSample> dev_scores;
  std::vector<ScoredSample> test_scores;
  EvalReport report;
};

inline ScoreSet to_score_set(const std::vector<ScoredSample>& scores,
                             bool higher_is_genuine) {
  ScoreSet set;
  set.higher_is_genuine = higher_is_genuine;
  for (const ScoredSample& s : scores) {
    set.entries.push_back(ScoreEntry{s.id, s.score, s.label});
  }
  return set;
}

// Class prototypes are the mean reference embeddings: one for genuine,
// one per attack type among the references. Test embeddings get
// assigned to the nearest prototype; rows cover the true classes in
// test, so a held-out type shows up as a row spread over the others.
inline void fill_prototype_confusion(const EncoderParameters& params,
                                     const ReferenceSets& refs,
                                     const std::vector<Sample>& test,
                                     EvalReport& report) {
  std::vector<std::string> classes = {"genuine"};
  std::vector<Embedding> prototypes;
  {
    Embedding proto;
    proto.values.assign(refs.genuine.front().dim(), 0.0);
    for (const Embedding& e : refs.genuine) {
      for (std::size_t i = 0; i < e.dim(); ++i) proto.values[i] += e[i];
    }
    for (double& v : proto.values) {
      v /= static_cast<double>(refs.genuine.size());
    }
    prototypes.push_back(std::move(proto));
  }
  for (PaiType type : {PaiType::print, PaiType::replay, PaiType::mask}) {
    Embedding proto;
    std::size_t count = 0;
    for (std::size_t k = 0; k < refs.attacks.size(); ++k) {
      if (*refs.attack_labels[k].pai_type != type) continue;
      if (proto.values.empty()) {
        proto.values.assign(refs.attacks[k].dim(), 0.0);
      }
      for (std::size_t i = 0; i < refs.attacks[k].dim(); ++i) {
        proto.values[i] += refs.attacks[k][i];
      }
      ++count;
    }
    if (count == 0) continue;
    for (double& v : proto.values) v /= static_cast<double>(count);
    classes.push_back(to_string(type));
    prototypes.push_back(std::move(proto));
  }

  std::vector<std::string> rows = {"genuine"};
  for (PaiType type : {PaiType::print, PaiType::replay, PaiType::mask}) {
    for (const Sample& s : test) {
      if (s.label.is_attack() && *s.label.pai_type == type) {
        rows.push_back(to_string(type));
        break;
      }
    }
  }

  std::map<std::string, std::size_t> row_index;
  for (std::size_t r = 0; r < rows.size(); ++r) row_index[rows[r]] = r;
  std::vector<std::vector<double>> counts(
      rows.size(), std::vector<double>(classes.size(), 0.0));
  std::vector<double> row_totals(rows.size(), 0.0);
  for (const Sample& s : test) {
    const Embedding e = forward(params, s.features);
    std::size_t best = 0;
    double best_d = squared_distance(e, prototypes[0]);
    for (std::size_t c = 1; c < prototypes.size(); ++c) {
      const double d = squared_distance(e, prototypes[c]);
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    const std::string row_key =
        s.label.is_genuine() ? "genuine" : to_string(*s.label.pai_type);
    const std::size_t r = row_index.at(row_key);
    counts[r][best] += 1.0;
    row_totals[r] += 1.0;
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (double& v : counts[r]) v /= row_totals[r];
  }
  report.prototype_rows = std::move(rows);
  report.prototype_classes = std::move(classes);
  report.prototype_confusion = std::move(counts);
}

// The full experiment: protocol split, training, reference selection,
// scoring, report. Every random choice derives from the single seed in
// the train config.
inline ProtocolResult run_protocol(const Benchmark& benchmark,
                                   const ProtocolSpec& spec,
                                   const PipelineConfig& cfg) {
  ProtocolResult result;
  result.spec = spec;
  result.splits = apply_protocol_split(benchmark.samples, spec);

  Rng refs_rng(derive_seed(cfg.train.seed, "refs"));
  result.selection = select_reference_samples(result.splits.train,
                                              cfg.fewshot_m, refs_rng);

  const SoftmaxSign sign = cfg.train.loss.softmax_sign;
  const bool higher_is_genuine = sign == SoftmaxSign::corrected;
  DevMetricFn dev_metric;
  if (cfg.train.early_stop) {
    dev_metric = [&](const EncoderParameters& params) {
      const ReferenceSets refs = embed_references(params, result.selection);
      const ScoreSet dev = to_score_set(
          score_split(params, result.splits.dev, refs, sign),
          higher_is_genuine);
      return eer_threshold(dev).eer;
    };
  }
  result.training = train(result.splits.train, cfg.train, dev_metric);

  result.refs = embed_references(result.training.params, result.selection);
  result.dev_scores = score_split(result.training.params, result.splits.dev,
                                  result.refs, sign);
  result.test_scores = score_split(result.training.params, result.splits.test,
                                   result.refs, sign);

  PadReportOptions options;
  options.subtype_apcer = cfg.subtype_apcer;
  result.report = pad_report(
      to_score_set(result.dev_scores, higher_is_genuine),
      to_score_set(result.test_scores, higher_is_genuine), options);
  fill_prototype_confusion(result.training.params, result.refs,
                                   result.splits.test, result.report);
  return result;
}

}  // namespace anomet
