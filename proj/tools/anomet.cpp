#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "anomet/anomet.hpp"

namespace fs = std::filesystem;

namespace {

using namespace anomet;

struct CliOptions {
  std::string config_path;
  std::string out_dir = "anomet-out";
  std::optional<std::uint64_t> seed;
  std::string loss;
  std::string mode;
  std::string softmax_sign;
  std::optional<std::size_t> m;
  std::optional<long long> epochs;
  std::string protocol;
  std::string holdout_tag;
  std::string holdout_pai;
  std::string checkpoint;
  std::string seeds_csv;
  std::string dev_path;
  std::string test_path;
  bool lower_is_genuine = false;
};

ordered_json load_config_root(const std::string& path) {
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
  return root;
}

// Config file (or defaults), then flag overrides, then the implicit
// grandtest-toy benchmark if none was named.
RunConfig resolve_config(const CliOptions& opts, const ordered_json& root) {
  RunConfig cfg =
      root.is_null() ? RunConfig{} : run_config_from_json(root);
  if (opts.seed) {
    cfg.seed = *opts.seed;
    cfg.pipeline.train.seed = *opts.seed;
  } else {
    cfg.pipeline.train.seed = cfg.seed;
  }
  TrainConfig& t = cfg.pipeline.train;
  if (!opts.loss.empty()) t.loss_kind = loss_kind_from_string(opts.loss);
  if (!opts.mode.empty()) t.mode = mining_mode_from_string(opts.mode);
  if (!opts.softmax_sign.empty()) {
    t.loss.softmax_sign = softmax_sign_from_string(opts.softmax_sign);
  }
  if (opts.epochs) {
    if (*opts.epochs < 0) {
      throw std::invalid_argument("--epochs must be non-negative");
    }
    t.epochs = static_cast<std::size_t>(*opts.epochs);
  }
  if (opts.m) {
    if (*opts.m == 0) throw std::invalid_argument("--M must be positive");
    cfg.pipeline.fewshot_m = *opts.m;
  }
  if (!opts.protocol.empty()) {
    cfg.protocol.kind = protocol_kind_from_string(opts.protocol);
  }
  if (!opts.holdout_tag.empty()) {
    cfg.protocol.holdout_tag = opts.holdout_tag;
    if (opts.protocol.empty()) cfg.protocol.kind = ProtocolKind::holdout;
  }
  if (!opts.holdout_pai.empty()) {
    cfg.protocol.holdout_pai = pai_selector_from_string(opts.holdout_pai);
    if (opts.protocol.empty()) cfg.protocol.kind = ProtocolKind::holdout;
  }
  if (!cfg.generate_spec && !cfg.ingest_spec) {
    cfg.generate_spec = grandtest_toy();
  }
  return cfg;
}

Benchmark obtain_benchmark(const RunConfig& cfg) {
  if (cfg.ingest_spec) {
    return cfg.ingest_spec->format == "csv"
               ? ingest_benchmark_csv(cfg.ingest_spec->path)
               : ingest_benchmark_jsonl(cfg.ingest_spec->path);
  }
  return generate(*cfg.generate_spec);
}

std::string out_file(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw DataError("cannot create output directory '" + dir + "': " +
                    ec.message());
  }
}

std::vector<std::uint64_t> parse_seeds(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::string token;
  std::stringstream ss(csv);
  while (std::getline(ss, token, ',')) {
    if (token.empty()) continue;
    try {
      seeds.push_back(std::stoull(token));
    } catch (const std::exception&) {
      throw std::invalid_argument("--seeds: '" + token +
                                  "' is not a valid seed");
    }
  }
  if (seeds.empty()) throw std::invalid_argument("--seeds: empty list");
  return seeds;
}

int cmd_generate(const CliOptions& opts) {
  const ordered_json root = opts.config_path.empty()
                                ? ordered_json()
                                : load_config_root(opts.config_path);
  RunConfig cfg = resolve_config(opts, root);
  if (cfg.generate_spec && opts.seed) cfg.generate_spec->seed = *opts.seed;
  const Benchmark bench = obtain_benchmark(cfg);
  ensure_out_dir(opts.out_dir);
  const std::string jsonl = out_file(opts.out_dir, "benchmark.jsonl");
  const std::string csv = out_file(opts.out_dir, "benchmark.csv");
  export_benchmark_jsonl(bench, jsonl);
  export_benchmark_csv(bench, csv);
  write_manifest(out_file(opts.out_dir, "manifest.json"), "generate", cfg,
                 {{"benchmark.jsonl", jsonl}, {"benchmark.csv", csv}});
  std::size_t genuine = 0;
  for (const Sample& s : bench.samples) {
    if (s.label.is_genuine()) ++genuine;
  }
  std::cout << "generated " << bench.samples.size() << " samples (" << genuine
            << " genuine, " << bench.samples.size() - genuine
            << " attacks) -> " << opts.out_dir << "\n";
  return 0;
}

int cmd_train(const CliOptions& opts) {
  const ordered_json root = opts.config_path.empty()
                                ? ordered_json()
                                : load_config_root(opts.config_path);
  const RunConfig cfg = resolve_config(opts, root);
  const Benchmark bench = obtain_benchmark(cfg);
  const ProtocolResult result =
      run_protocol(bench, cfg.protocol, cfg.pipeline);
  ensure_out_dir(opts.out_dir);

  const std::string ckpt = out_file(opts.out_dir, "checkpoint.json");
  const std::string log = out_file(opts.out_dir, "train_log.jsonl");
  const std::string summary = out_file(opts.out_dir, "train_summary.json");
  save_checkpoint(result.training.params, result.training.centers, cfg, ckpt);
  write_training_log(result.training, cfg.pipeline.train, log);
  {
    ordered_json j;
    j["loss"] = to_string(cfg.pipeline.train.loss_kind);
    j["mode"] = to_string(cfg.pipeline.train.mode);
    j["epochs_run"] = result.training.epochs.size();
    j["stopped_early"] = result.training.stopped_early;
    j["final_dev_aer"] = result.report.aer;
    j["dev_eer_threshold"] = result.report.threshold;
    std::ofstream out(summary, std::ios::binary);
    if (!out) throw DataError("cannot open '" + summary + "' for writing");
    out << j.dump(2) << "\n";
  }
  write_manifest(out_file(opts.out_dir, "manifest.json"), "train", cfg,
                 {{"checkpoint.json", ckpt},
                  {"train_log.jsonl", log},
                  {"train_summary.json", summary}});
  std::cout << "trained " << to_string(cfg.pipeline.train.loss_kind) << "/"
            << to_string(cfg.pipeline.train.mode) << " for "
            << result.training.epochs.size() << " epochs, final dev AER "
            << format_double(result.report.aer) << " -> " << opts.out_dir
            << "\n";
  return 0;
}

int cmd_evaluate(const CliOptions& opts) {
  const Checkpoint ckpt = load_checkpoint(opts.checkpoint);
  RunConfig cfg;
  if (!opts.config_path.empty()) {
    cfg = resolve_config(opts, load_config_root(opts.config_path));
  } else {
    const ordered_json embedded = run_config_to_json(ckpt.config);
    cfg = resolve_config(opts, embedded);
  }
  const Benchmark bench = obtain_benchmark(cfg);
  const SplitView splits = apply_protocol_split(bench.samples, cfg.protocol);

  Rng refs_rng(derive_seed(cfg.seed, "refs"));
  const ReferenceSelection selection = select_reference_samples(
      splits.train, cfg.pipeline.fewshot_m, refs_rng);
  const ReferenceSets refs = embed_references(ckpt.params, selection);
  const SoftmaxSign sign = cfg.pipeline.train.loss.softmax_sign;
  const bool higher = sign == SoftmaxSign::corrected;
  const std::vector<ScoredSample> dev_scores =
      score_split(ckpt.params, splits.dev, refs, sign);
  const std::vector<ScoredSample> test_scores =
      score_split(ckpt.params, splits.test, refs, sign);

  PadReportOptions report_options;
  report_options.subtype_apcer = cfg.pipeline.subtype_apcer;
  EvalReport report =
      pad_report(to_score_set(dev_scores, higher),
                 to_score_set(test_scores, higher), report_options);
  fill_prototype_confusion(ckpt.params, refs, splits.test, report);

  ensure_out_dir(opts.out_dir);
  const std::string report_path = out_file(opts.out_dir, "report.json");
  const std::string dev_path = out_file(opts.out_dir, "scores_dev.csv");
  const std::string test_path = out_file(opts.out_dir, "scores_test.csv");
  const std::string confusion_path = out_file(opts.out_dir, "confusion.csv");
  write_report_json(report, report_path);
  write_scores_csv(dev_scores, dev_path);
  write_scores_csv(test_scores, test_path);
  write_confusion_csv(report, confusion_path);
  write_manifest(out_file(opts.out_dir, "manifest.json"), "evaluate", cfg,
                 {{"report.json", report_path},
                  {"scores_dev.csv", dev_path},
                  {"scores_test.csv", test_path},
                  {"confusion.csv", confusion_path}},
                 {{"checkpoint", opts.checkpoint}});
  std::cout << "evaluated: test HTER " << format_double(report.hter)
            << ", ACER " << format_double(report.acer) << ", dev AER "
            << format_double(report.aer) << " -> " << opts.out_dir << "\n";
  return 0;
}

struct AblationVariant {
  std::string name;
  LossKind loss;
  MiningMode mode;
};

double median(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2]
                    : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

int cmd_ablation(const CliOptions& opts) {
  const ordered_json root = opts.config_path.empty()
                                ? ordered_json()
                                : load_config_root(opts.config_path);
  const RunConfig base = resolve_config(opts, root);
  std::vector<std::uint64_t> seeds;
  if (!opts.seeds_csv.empty()) {
    seeds = parse_seeds(opts.seeds_csv);
  } else if (root.is_object() && root.contains("parameters") &&
             root.at("parameters").contains("seeds")) {
    // replaying an ablation manifest
    seeds = root.at("parameters")
                .at("seeds")
                .get<std::vector<std::uint64_t>>();
  } else {
    seeds = {base.seed};
  }

  const std::vector<AblationVariant> variants = {
      {"baseline", LossKind::triplet, MiningMode::classwise},
      {"model-1", LossKind::triplet, MiningMode::anomaly},
      {"model-2", LossKind::triplet_focal, MiningMode::anomaly},
      {"ours", LossKind::anomaly, MiningMode::anomaly},
  };

  const Benchmark bench = obtain_benchmark(base);
  std::map<std::string, std::vector<double>> aer_by_variant;
  std::vector<ordered_json> rows;
  for (std::uint64_t seed : seeds) {
    std::map<std::string, EvalReport> reports;
    for (const AblationVariant& v : variants) {
      RunConfig cfg = base;
      cfg.seed = seed;
      cfg.pipeline.train.seed = seed;
      cfg.pipeline.train.loss_kind = v.loss;
      cfg.pipeline.train.mode = v.mode;
      const ProtocolResult result =
          run_protocol(bench, cfg.protocol, cfg.pipeline);
      reports[v.name] = result.report;
      aer_by_variant[v.name].push_back(result.report.aer);
    }
    const double base_aer = reports.at("baseline").aer;
    for (const AblationVariant& v : variants) {
      const EvalReport& r = reports.at(v.name);
      const double delta =
          base_aer == 0.0 ? 0.0 : (base_aer - r.aer) / base_aer;
      ordered_json row;
      row["seed"] = seed;
      row["variant"] = v.name;
      row["loss"] = to_string(v.loss);
      row["mode"] = to_string(v.mode);
      row["aer"] = r.aer;
      row["far"] = r.dev_far;
      row["frr"] = r.dev_frr;
      row["delta_aer"] = v.name == "baseline" ? 0.0 : delta;
      rows.push_back(std::move(row));
    }
  }

  ensure_out_dir(opts.out_dir);
  const std::string csv_path = out_file(opts.out_dir, "ablation.csv");
  {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + csv_path + "' for writing");
    out << "seed,variant,loss,mode,aer,far,frr,delta_aer\n";
    for (const ordered_json& row : rows) {
      out << row.at("seed").get<std::uint64_t>() << ","
          << row.at("variant").get<std::string>() << ","
          << row.at("loss").get<std::string>() << ","
          << row.at("mode").get<std::string>() << ","
          << format_double(row.at("aer").get<double>()) << ","
          << format_double(row.at("far").get<double>()) << ","
          << format_double(row.at("frr").get<double>()) << ","
          << format_double(row.at("delta_aer").get<double>()) << "\n";
    }
  }
  const std::string median_path = out_file(opts.out_dir,
                                           "ablation_median.csv");
  const double median_base = median(aer_by_variant.at("baseline"));
  {
    std::ofstream out(median_path, std::ios::binary);
    if (!out) {
      throw DataError("cannot open '" + median_path + "' for writing");
    }
    out << "variant,loss,mode,median_aer,delta_aer\n";
    for (const AblationVariant& v : variants) {
      const double m = median(aer_by_variant.at(v.name));
      const double delta = v.name == "baseline" || median_base == 0.0
                               ? 0.0
                               : (median_base - m) / median_base;
      out << v.name << "," << to_string(v.loss) << "," << to_string(v.mode)
          << "," << format_double(m) << "," << format_double(delta) << "\n";
    }
  }
  const std::string txt_path = out_file(opts.out_dir, "ablation.txt");
  {
    std::ofstream out(txt_path, std::ios::binary);
    if (!out) throw DataError("cannot open '" + txt_path + "' for writing");
    out << "variant    loss            mode       median AER  delta AER\n";
    for (const AblationVariant& v : variants) {
      const double m = median(aer_by_variant.at(v.name));
      const double delta = v.name == "baseline" || median_base == 0.0
                               ? 0.0
                               : (median_base - m) / median_base;
      char line[128];
      std::snprintf(line, sizeof(line), "%-10s %-15s %-10s %10.4f %10.4f\n",
                    v.name.c_str(), to_string(v.loss), to_string(v.mode), m,
                    delta);
      out << line;
    }
  }
  ordered_json parameters;
  parameters["seeds"] = seeds;
  write_manifest(out_file(opts.out_dir, "manifest.json"), "ablation", base,
                 {{"ablation.csv", csv_path},
                  {"ablation_median.csv", median_path},
                  {"ablation.txt", txt_path}},
                 {}, parameters);
  for (const AblationVariant& v : variants) {
    std::cout << v.name << " median AER "
              << format_double(median(aer_by_variant.at(v.name))) << "\n";
  }
  std::cout << "-> " << opts.out_dir << "\n";
  return 0;
}

int cmd_report(const CliOptions& opts) {
  const std::vector<ScoredSample> dev = read_scores_csv(opts.dev_path);
  const std::vector<ScoredSample> test = read_scores_csv(opts.test_path);
  const bool higher = !opts.lower_is_genuine;
  const EvalReport report =
      pad_report(to_score_set(dev, higher), to_score_set(test, higher));
  ensure_out_dir(opts.out_dir);
  const std::string report_path = out_file(opts.out_dir, "report.json");
  const std::string confusion_path = out_file(opts.out_dir, "confusion.csv");
  write_report_json(report, report_path);
  write_confusion_csv(report, confusion_path);
  {
    ordered_json j;
    j["manifest_version"] = kVersion;
    j["command"] = "report";
    j["parameters"] = {{"dev", opts.dev_path},
                       {"test", opts.test_path},
                       {"lower_is_genuine", opts.lower_is_genuine}};
    j["inputs"] = {{"dev", hex64(fnv1a64_file(opts.dev_path))},
                   {"test", hex64(fnv1a64_file(opts.test_path))}};
    j["outputs"] = {{"report.json", hex64(fnv1a64_file(report_path))},
                    {"confusion.csv", hex64(fnv1a64_file(confusion_path))}};
    const std::string manifest_path = out_file(opts.out_dir, "manifest.json");
    std::ofstream out(manifest_path, std::ios::binary);
    if (!out) {
      throw DataError("cannot open '" + manifest_path + "' for writing");
    }
    out << j.dump(2) << "\n";
  }
  std::cout << "report: test HTER " << format_double(report.hter) << ", ACER "
            << format_double(report.acer) << ", dev EER "
            << format_double(report.dev_eer) << " -> " << opts.out_dir
            << "\n";
  return 0;
}

int run_guarded(const std::function<int()>& fn) {
  try {
    return fn();
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"metric-learning anomaly detection toolkit"};
  app.require_subcommand(1);
  CliOptions opts;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", opts.config_path, "JSON run config");
    cmd->add_option("--seed", opts.seed, "run seed");
    cmd->add_option("--out", opts.out_dir, "output directory");
  };
  const auto add_experiment = [&](CLI::App* cmd) {
    cmd->add_option("--loss", opts.loss,
                    "center|contrastive|triplet|triplet-focal|metric-softmax|"
                    "anomaly");
    cmd->add_option("--mode", opts.mode, "anomaly|classwise");
    cmd->add_option("--softmax-sign", opts.softmax_sign, "paper|corrected");
    cmd->add_option("--M", opts.m, "reference pairs per set");
    cmd->add_option("--protocol", opts.protocol, "intra|holdout");
    cmd->add_option("--holdout-tag", opts.holdout_tag,
                    "domain tag to hold out");
    cmd->add_option("--holdout-pai", opts.holdout_pai,
                    "attack to hold out, e.g. replay or print/low");
  };

  CLI::App* gen = app.add_subcommand("generate", "write a benchmark to disk");
  add_common(gen);
  CLI::App* train_cmd =
      app.add_subcommand("train", "train an encoder and checkpoint it");
  add_common(train_cmd);
  add_experiment(train_cmd);
  train_cmd->add_option("--epochs", opts.epochs, "training epochs");
  CLI::App* eval_cmd = app.add_subcommand(
      "evaluate", "score dev/test from a checkpoint and report");
  add_common(eval_cmd);
  add_experiment(eval_cmd);
  eval_cmd->add_option("--checkpoint", opts.checkpoint, "checkpoint file")
      ->required();
  CLI::App* abl = app.add_subcommand(
      "ablation", "compare baseline, triplet, focal and combined variants");
  add_common(abl);
  abl->add_option("--epochs", opts.epochs, "training epochs");
  abl->add_option("--seeds", opts.seeds_csv, "comma-separated seed list");
  CLI::App* rep = app.add_subcommand(
      "report", "recompute metrics from score files");
  rep->add_option("--dev", opts.dev_path, "dev score CSV")->required();
  rep->add_option("--test", opts.test_path, "test score CSV")->required();
  rep->add_flag("--lower-is-genuine", opts.lower_is_genuine,
                "scores decrease toward genuine");
  rep->add_option("--out", opts.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (gen->parsed()) return run_guarded([&] { return cmd_generate(opts); });
  if (train_cmd->parsed()) return run_guarded([&] { return cmd_train(opts); });
  if (eval_cmd->parsed()) return run_guarded([&] { return cmd_evaluate(opts); });
  if (abl->parsed()) return run_guarded([&] { return cmd_ablation(opts); });
  if (rep->parsed()) return run_guarded([&] { return cmd_report(opts); });
  return 1;
}
