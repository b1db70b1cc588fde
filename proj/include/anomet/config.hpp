#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "anomet/benchmark.hpp"
#include "anomet/protocol.hpp"
#include "anomet/trainer.hpp"

namespace anomet {

using ordered_json = nlohmann::ordered_json;

// External feature-vector dataset to load instead of generating one.
struct IngestSpec {
  std::string path;
  std::string format;  // "jsonl" or "csv"
};

// Everything a run needs, resolvable before any computation starts.
struct RunConfig {
  std::uint64_t seed = 7;
  std::optional<BenchmarkSpec> generate_spec;
  std::optional<IngestSpec> ingest_spec;
  PipelineConfig pipeline;
  ProtocolSpec protocol;
};

namespace detail {

inline void check_keys(const ordered_json& obj,
                       const std::set<std::string>& allowed,
                       const std::string& where) {
  if (!obj.is_object()) {
    throw std::invalid_argument("config: " + where + " must be an object");
  }
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.count(key)) {
      throw std::invalid_argument("config: unknown key '" + key + "' in " +
                                  where);
    }
  }
}

template <typename T>
T get_or(const ordered_json& obj, const char* key, T fallback,
         const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw std::invalid_argument("config: bad value for '" + std::string(key) +
                                "' in " + where);
  }
}

inline std::string require_string(const ordered_json& obj, const char* key,
                                  const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_string()) {
    throw std::invalid_argument("config: " + where + " requires string '" +
                                key + "'");
  }
  return obj.at(key).get<std::string>();
}

}  // namespace detail

inline ordered_json benchmark_spec_to_json(const BenchmarkSpec& spec) {
  ordered_json j;
  j["seed"] = spec.seed;
  j["input_dim"] = spec.input_dim;
  j["genuine"] = {{"components", spec.genuine.components},
                  {"count", spec.genuine.count},
                  {"component_scale", spec.genuine.component_scale},
                  {"spread", spec.genuine.spread}};
  j["attack_classes"] = ordered_json::array();
  for (const AttackClassSpec& c : spec.attack_classes) {
    j["attack_classes"].push_back({{"pai_type", to_string(c.pai_type)},
                                   {"pai_subtype", c.pai_subtype},
                                   {"mean_scale", c.mean_scale},
                                   {"cov_scale", c.cov_scale},
                                   {"count", c.count}});
  }
  j["domains"] = ordered_json::array();
  for (const DomainSpec& d : spec.domains) {
    j["domains"].push_back({{"tag", d.tag},
                            {"offset_scale", d.offset_scale}});
  }
  j["splits"] = {{"train", spec.splits.train},
                 {"dev", spec.splits.dev},
                 {"test", spec.splits.test}};
  return j;
}

// Every field defaults to the grandtest-toy value, so a partial spec
// describes a variation of it.
inline BenchmarkSpec benchmark_spec_from_json(const ordered_json& j,
                                              const std::string& where) {
  detail::check_keys(j, {"seed", "input_dim", "genuine", "attack_classes",
                         "domains", "splits"},
                     where);
  BenchmarkSpec spec = grandtest_toy();
  spec.seed = detail::get_or<std::uint64_t>(j, "seed", spec.seed, where);
  spec.input_dim =
      detail::get_or<std::size_t>(j, "input_dim", spec.input_dim, where);
  if (j.contains("genuine")) {
    const ordered_json& g = j.at("genuine");
    detail::check_keys(g, {"components", "count", "component_scale", "spread"},
                       where + ".genuine");
    spec.genuine.components = detail::get_or<std::size_t>(
        g, "components", spec.genuine.components, where);
    spec.genuine.count =
        detail::get_or<std::size_t>(g, "count", spec.genuine.count, where);
    spec.genuine.component_scale = detail::get_or<double>(
        g, "component_scale", spec.genuine.component_scale, where);
    spec.genuine.spread =
        detail::get_or<double>(g, "spread", spec.genuine.spread, where);
  }
  if (j.contains("attack_classes")) {
    if (!j.at("attack_classes").is_array()) {
      throw std::invalid_argument("config: " + where +
                                  ".attack_classes must be an array");
    }
    spec.attack_classes.clear();
    for (const ordered_json& c : j.at("attack_classes")) {
      detail::check_keys(
          c, {"pai_type", "pai_subtype", "mean_scale", "cov_scale", "count"},
          where + ".attack_classes[]");
      AttackClassSpec cls;
      cls.pai_type = pai_type_from_string(
          detail::require_string(c, "pai_type", where + ".attack_classes[]"));
      cls.pai_subtype = detail::require_string(c, "pai_subtype",
                                               where + ".attack_classes[]");
      cls.mean_scale =
          detail::get_or<double>(c, "mean_scale", cls.mean_scale, where);
      cls.cov_scale =
          detail::get_or<double>(c, "cov_scale", cls.cov_scale, where);
      cls.count = detail::get_or<std::size_t>(c, "count", cls.count, where);
      spec.attack_classes.push_back(std::move(cls));
    }
  }
  if (j.contains("domains")) {
    if (!j.at("domains").is_array()) {
      throw std::invalid_argument("config: " + where +
                                  ".domains must be an array");
    }
    spec.domains.clear();
    for (const ordered_json& d : j.at("domains")) {
      detail::check_keys(d, {"tag", "offset_scale"}, where + ".domains[]");
      DomainSpec dom;
      dom.tag = detail::require_string(d, "tag", where + ".domains[]");
      dom.offset_scale =
          detail::get_or<double>(d, "offset_scale", dom.offset_scale, where);
      spec.domains.push_back(std::move(dom));
    }
  }
  if (j.contains("splits")) {
    const ordered_json& s = j.at("splits");
    detail::check_keys(s, {"train", "dev", "test"}, where + ".splits");
    spec.splits.train =
        detail::get_or<double>(s, "train", spec.splits.train, where);
    spec.splits.dev = detail::get_or<double>(s, "dev", spec.splits.dev, where);
    spec.splits.test =
        detail::get_or<double>(s, "test", spec.splits.test, where);
  }
  validate_spec(spec);
  return spec;
}

inline ordered_json run_config_to_json(const RunConfig& cfg) {
  ordered_json j;
  j["seed"] = cfg.seed;
  if (cfg.generate_spec) {
    j["benchmark"] = {{"generate", benchmark_spec_to_json(*cfg.generate_spec)}};
  } else if (cfg.ingest_spec) {
    j["benchmark"] = {{"ingest", {{"path", cfg.ingest_spec->path},
                                  {"format", cfg.ingest_spec->format}}}};
  }
  const TrainConfig& t = cfg.pipeline.train;
  j["encoder"] = {{"input_dim", t.encoder.input_dim},
                  {"hidden_dims", t.encoder.hidden_dims},
                  {"output_dim", t.encoder.output_dim}};
  j["loss"] = {{"kind", to_string(t.loss_kind)},
               {"margin", t.loss.margin},
               {"sigma", t.loss.sigma},
               {"lambda", t.loss.lambda},
               {"softmax_sign", to_string(t.loss.softmax_sign)}};
  j["miner"] = {
      {"mode", to_string(t.mode)},
      {"pool_size", t.miner.pool_size},
      {"triplets_per_batch", t.miner.triplets_per_batch},
      {"margin", t.miner.margin},
      {"fallback", t.miner.fallback == MiningFallback::skip_pair
                       ? "skip-pair"
                       : "hardest-negative"}};
  j["optimizer"] = {{"learning_rate", t.learning_rate},
                    {"momentum", t.momentum}};
  j["train"] = {{"epochs", t.epochs},
                {"early_stop", t.early_stop},
                {"patience", t.patience}};
  ordered_json protocol;
  protocol["kind"] = to_string(cfg.protocol.kind);
  if (cfg.protocol.holdout_tag) {
    protocol["holdout_tag"] = *cfg.protocol.holdout_tag;
  }
  if (cfg.protocol.holdout_pai) {
    protocol["holdout_pai"] = to_string(*cfg.protocol.holdout_pai);
  }
  j["protocol"] = protocol;
  j["fewshot"] = {{"m", cfg.pipeline.fewshot_m},
                  {"subtype_apcer", cfg.pipeline.subtype_apcer}};
  return j;
}

inline RunConfig run_config_from_json(const ordered_json& root) {
  // A manifest can be replayed directly: its echoed config wins.
  const ordered_json& j =
      root.is_object() && root.contains("resolved_config")
          ? root.at("resolved_config")
          : root;
  detail::check_keys(j,
                     {"seed", "benchmark", "encoder", "loss", "miner",
                      "optimizer", "train", "protocol", "fewshot"},
                     "config");
  RunConfig cfg;
  cfg.seed = detail::get_or<std::uint64_t>(j, "seed", cfg.seed, "config");
  TrainConfig& t = cfg.pipeline.train;
  t.seed = cfg.seed;

  if (j.contains("benchmark")) {
    const ordered_json& b = j.at("benchmark");
    detail::check_keys(b, {"generate", "ingest"}, "config.benchmark");
    if (b.contains("generate") && b.contains("ingest")) {
      throw std::invalid_argument(
          "config: benchmark takes either generate or ingest, not both");
    }
    if (b.contains("generate")) {
      cfg.generate_spec = benchmark_spec_from_json(b.at("generate"),
                                                   "config.benchmark.generate");
    } else if (b.contains("ingest")) {
      const ordered_json& in = b.at("ingest");
      detail::check_keys(in, {"path", "format"}, "config.benchmark.ingest");
      IngestSpec ingest;
      ingest.path = detail::require_string(in, "path",
                                           "config.benchmark.ingest");
      ingest.format = detail::get_or<std::string>(in, "format", "jsonl",
                                                  "config.benchmark.ingest");
      if (ingest.format != "jsonl" && ingest.format != "csv") {
        throw std::invalid_argument(
            "config: ingest format must be jsonl or csv, got '" +
            ingest.format + "'");
      }
      cfg.ingest_spec = std::move(ingest);
    }
  }

  if (j.contains("encoder")) {
    const ordered_json& e = j.at("encoder");
    detail::check_keys(e, {"input_dim", "hidden_dims", "output_dim"},
                       "config.encoder");
    t.encoder.input_dim = detail::get_or<std::size_t>(
        e, "input_dim", t.encoder.input_dim, "config.encoder");
    t.encoder.hidden_dims = detail::get_or<std::vector<std::size_t>>(
        e, "hidden_dims", t.encoder.hidden_dims, "config.encoder");
    t.encoder.output_dim = detail::get_or<std::size_t>(
        e, "output_dim", t.encoder.output_dim, "config.encoder");
  }
  bool miner_margin_set = false;
  if (j.contains("loss")) {
    const ordered_json& l = j.at("loss");
    detail::check_keys(l, {"kind", "margin", "sigma", "lambda",
                           "softmax_sign"},
                       "config.loss");
    if (l.contains("kind")) {
      t.loss_kind = loss_kind_from_string(
          detail::require_string(l, "kind", "config.loss"));
    }
    t.loss.margin =
        detail::get_or<double>(l, "margin", t.loss.margin, "config.loss");
    t.loss.sigma =
        detail::get_or<double>(l, "sigma", t.loss.sigma, "config.loss");
    t.loss.lambda =
        detail::get_or<double>(l, "lambda", t.loss.lambda, "config.loss");
    if (l.contains("softmax_sign")) {
      t.loss.softmax_sign = softmax_sign_from_string(
          detail::require_string(l, "softmax_sign", "config.loss"));
    }
  }
  if (j.contains("miner")) {
    const ordered_json& m = j.at("miner");
    detail::check_keys(m,
                       {"mode", "pool_size", "triplets_per_batch", "margin",
                        "fallback"},
                       "config.miner");
    if (m.contains("mode")) {
      t.mode = mining_mode_from_string(
          detail::require_string(m, "mode", "config.miner"));
    }
    t.miner.pool_size = detail::get_or<std::size_t>(
        m, "pool_size", t.miner.pool_size, "config.miner");
    t.miner.triplets_per_batch = detail::get_or<std::size_t>(
        m, "triplets_per_batch", t.miner.triplets_per_batch, "config.miner");
    if (m.contains("margin")) {
      t.miner.margin =
          detail::get_or<double>(m, "margin", t.miner.margin, "config.miner");
      miner_margin_set = true;
    }
    if (m.contains("fallback")) {
      const std::string fb =
          detail::require_string(m, "fallback", "config.miner");
      if (fb == "skip-pair") {
        t.miner.fallback = MiningFallback::skip_pair;
      } else if (fb == "hardest-negative") {
        t.miner.fallback = MiningFallback::hardest_negative;
      } else {
        throw std::invalid_argument(
            "config: miner fallback must be skip-pair or hardest-negative, "
            "got '" +
            fb + "'");
      }
    }
  }
  if (!miner_margin_set) t.miner.margin = t.loss.margin;
  if (j.contains("optimizer")) {
    const ordered_json& o = j.at("optimizer");
    detail::check_keys(o, {"learning_rate", "momentum"}, "config.optimizer");
    t.learning_rate = detail::get_or<double>(o, "learning_rate",
                                             t.learning_rate,
                                             "config.optimizer");
    t.momentum =
        detail::get_or<double>(o, "momentum", t.momentum, "config.optimizer");
  }
  if (j.contains("train")) {
    const ordered_json& tr = j.at("train");
    detail::check_keys(tr, {"epochs", "early_stop", "patience"},
                       "config.train");
    t.epochs =
        detail::get_or<std::size_t>(tr, "epochs", t.epochs, "config.train");
    t.early_stop = detail::get_or<bool>(tr, "early_stop", t.early_stop,
                                        "config.train");
    t.patience = detail::get_or<std::size_t>(tr, "patience", t.patience,
                                             "config.train");
  }
  if (j.contains("protocol")) {
    const ordered_json& p = j.at("protocol");
    detail::check_keys(p, {"kind", "holdout_tag", "holdout_pai"},
                       "config.protocol");
    if (p.contains("kind")) {
      cfg.protocol.kind = protocol_kind_from_string(
          detail::require_string(p, "kind", "config.protocol"));
    }
    if (p.contains("holdout_tag")) {
      cfg.protocol.holdout_tag =
          detail::require_string(p, "holdout_tag", "config.protocol");
    }
    if (p.contains("holdout_pai")) {
      cfg.protocol.holdout_pai = pai_selector_from_string(
          detail::require_string(p, "holdout_pai", "config.protocol"));
    }
  }
  if (j.contains("fewshot")) {
    const ordered_json& f = j.at("fewshot");
    detail::check_keys(f, {"m", "subtype_apcer"}, "config.fewshot");
    cfg.pipeline.fewshot_m = detail::get_or<std::size_t>(
        f, "m", cfg.pipeline.fewshot_m, "config.fewshot");
    cfg.pipeline.subtype_apcer = detail::get_or<bool>(
        f, "subtype_apcer", cfg.pipeline.subtype_apcer, "config.fewshot");
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::invalid_argument("config: cannot open '" + path + "'");
  }
  ordered_json root;
  try {
    in >> root;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config: '" + path + "' is not valid JSON: " +
                                e.what());
  }
  return run_config_from_json(root);
}

}  // namespace anomet
