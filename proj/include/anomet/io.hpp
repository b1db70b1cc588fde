#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <system_error>
#include <vector>

#include <json.hpp>

#include "anomet/benchmark.hpp"
#include "anomet/config.hpp"
#include "anomet/errors.hpp"
#include "anomet/eval.hpp"
#include "anomet/fewshot.hpp"
#include "anomet/hash.hpp"
#include "anomet/trainer.hpp"
#include "anomet/types.hpp"
#include "anomet/version.hpp"

namespace anomet {

// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

inline double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto res = std::from_chars(begin, end, v);
  if (res.ec != std::errc() || res.ptr != end) {
    throw DataError(where + ": cannot parse number '" + text + "'");
  }
  return v;
}

namespace detail {

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  return in;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

inline ordered_json sample_to_json(const Sample& s) {
  ordered_json row;
  row["id"] = s.id;
  row["split"] = to_string(s.split);
  row["label"] = s.label.is_genuine() ? "genuine" : "attack";
  if (s.label.is_attack()) {
    row["pai_type"] = to_string(*s.label.pai_type);
    row["pai_subtype"] = *s.label.pai_subtype;
  }
  row["domain_tag"] = s.domain_tag;
  row["features"] = s.features;
  return row;
}

inline Sample sample_from_json(const ordered_json& row,
                               const std::string& where) {
  static const std::set<std::string> allowed = {
      "id", "split", "label", "pai_type", "pai_subtype", "domain_tag",
      "features"};
  if (!row.is_object()) throw DataError(where + ": row is not an object");
  for (const auto& [key, value] : row.items()) {
    if (!allowed.count(key)) {
      throw DataError(where + ": unknown field '" + key + "'");
    }
  }
  Sample s;
  try {
    s.id = row.at("id").get<std::string>();
    s.split = split_from_string(row.at("split").get<std::string>());
    const std::string label = row.at("label").get<std::string>();
    if (label == "genuine") {
      if (row.contains("pai_type") || row.contains("pai_subtype")) {
        throw DataError(where +
                        ": genuine row must not carry pai_type/pai_subtype");
      }
      s.label = Label::make_genuine();
    } else if (label == "attack") {
      if (!row.contains("pai_type") || !row.contains("pai_subtype")) {
        throw DataError(where +
                        ": attack row requires pai_type and pai_subtype");
      }
      s.label = Label::make_attack(
          pai_type_from_string(row.at("pai_type").get<std::string>()),
          row.at("pai_subtype").get<std::string>());
    } else {
      throw DataError(where + ": label must be genuine or attack, got '" +
                      label + "'");
    }
    s.domain_tag = row.at("domain_tag").get<std::string>();
    if (!row.contains("features") || !row.at("features").is_array() ||
        row.at("features").empty()) {
      throw DataError(where + ": features must be a non-empty array");
    }
    s.features = row.at("features").get<std::vector<double>>();
    validate_label(s.label);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(where + ": malformed row: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(where + ": " + e.what());
  }
  return s;
}

inline void check_ingested(std::vector<Sample>& samples,
                           const std::string& path) {
  if (samples.empty()) {
    throw DataError(path + ": no samples");
  }
  const std::size_t dim = samples.front().features.size();
  std::set<std::string> ids;
  for (const Sample& s : samples) {
    if (s.features.size() != dim) {
      throw DataError(path + ": sample '" + s.id + "' has " +
                      std::to_string(s.features.size()) +
                      " features, expected " + std::to_string(dim));
    }
    if (!ids.insert(s.id).second) {
      throw DataError(path + ": duplicate id '" + s.id + "'");
    }
  }
}

}  // namespace detail

inline void export_benchmark_jsonl(const Benchmark& bench,
                                   const std::string& path) {
  std::ofstream out = detail::open_out(path);
  for (const Sample& s : bench.samples) {
    out << detail::sample_to_json(s).dump() << "\n";
  }
}

inline Benchmark ingest_benchmark_jsonl(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  Benchmark bench;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    ordered_json row;
    try {
      row = ordered_json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError(where + ": invalid JSON: " + e.what());
    }
    bench.samples.push_back(detail::sample_from_json(row, where));
  }
  detail::check_ingested(bench.samples, path);
  bench.spec.input_dim = bench.samples.front().features.size();
  return bench;
}

inline void export_benchmark_csv(const Benchmark& bench,
                                 const std::string& path) {
  std::ofstream out = detail::open_out(path);
  if (bench.samples.empty()) throw DataError("export: empty benchmark");
  const std::size_t dim = bench.samples.front().features.size();
  out << "id,split,label,pai_type,pai_subtype,domain_tag";
  for (std::size_t i = 0; i < dim; ++i) out << ",features_" << i;
  out << "\n";
  for (const Sample& s : bench.samples) {
    out << s.id << "," << to_string(s.split) << ","
        << (s.label.is_genuine() ? "genuine" : "attack") << ","
        << (s.label.is_attack() ? to_string(*s.label.pai_type) : "") << ","
        << (s.label.is_attack() ? *s.label.pai_subtype : "") << ","
        << s.domain_tag;
    for (double f : s.features) out << "," << format_double(f);
    out << "\n";
  }
}

inline Benchmark ingest_benchmark_csv(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": no samples");
  const std::vector<std::string> header = detail::split_csv_line(line);
  const std::vector<std::string> fixed = {"id",       "split",
                                          "label",    "pai_type",
                                          "pai_subtype", "domain_tag"};
  if (header.size() <= fixed.size()) {
    throw DataError(path + ":1: header has no feature columns");
  }
  for (std::size_t i = 0; i < fixed.size(); ++i) {
    if (header[i] != fixed[i]) {
      throw DataError(path + ":1: expected column '" + fixed[i] +
                      "', found '" + header[i] + "'");
    }
  }
  const std::size_t dim = header.size() - fixed.size();
  for (std::size_t i = 0; i < dim; ++i) {
    if (header[fixed.size() + i] != "features_" + std::to_string(i)) {
      throw DataError(path + ":1: expected column 'features_" +
                      std::to_string(i) + "', found '" +
                      header[fixed.size() + i] + "'");
    }
  }

  Benchmark bench;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const std::vector<std::string> fields = detail::split_csv_line(line);
    if (fields.size() != header.size()) {
      throw DataError(where + ": expected " + std::to_string(header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    Sample s;
    s.id = fields[0];
    try {
      s.split = split_from_string(fields[1]);
      if (fields[2] == "genuine") {
        if (!fields[3].empty() || !fields[4].empty()) {
          throw DataError(where +
                          ": genuine row must not carry pai_type/pai_subtype");
        }
        s.label = Label::make_genuine();
      } else if (fields[2] == "attack") {
        s.label =
            Label::make_attack(pai_type_from_string(fields[3]), fields[4]);
      } else {
        throw DataError(where + ": label must be genuine or attack, got '" +
                        fields[2] + "'");
      }
      validate_label(s.label);
    } catch (const std::invalid_argument& e) {
      throw DataError(where + ": " + e.what());
    }
    s.domain_tag = fields[5];
    for (std::size_t i = 0; i < dim; ++i) {
      s.features.push_back(parse_double(fields[fixed.size() + i], where));
    }
    bench.samples.push_back(std::move(s));
  }
  detail::check_ingested(bench.samples, path);
  bench.spec.input_dim = bench.samples.front().features.size();
  return bench;
}

inline void write_scores_csv(const std::vector<ScoredSample>& scores,
                             const std::string& path) {
  std::ofstream out = detail::open_out(path);
  out << "id,score,raw_score,label,pai_type\n";
  for (const ScoredSample& s : scores) {
    out << s.id << "," << format_double(s.score) << ","
        << format_double(s.raw) << ","
        << (s.label.is_genuine() ? "genuine" : "attack") << ","
        << (s.label.is_attack() && s.label.pai_type
                ? to_string(*s.label.pai_type)
                : "")
        << "\n";
  }
}

inline std::vector<ScoredSample> read_scores_csv(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty score file");
  if (line != "id,score,raw_score,label,pai_type") {
    throw DataError(path + ":1: unexpected score header '" + line + "'");
  }
  std::vector<ScoredSample> scores;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const std::vector<std::string> fields = detail::split_csv_line(line);
    if (fields.size() != 5) {
      throw DataError(where + ": expected 5 fields, found " +
                      std::to_string(fields.size()));
    }
    ScoredSample s;
    s.id = fields[0];
    s.score = parse_double(fields[1], where);
    s.raw = parse_double(fields[2], where);
    if (fields[3] == "genuine") {
      if (!fields[4].empty()) {
        throw DataError(where + ": genuine row must not carry pai_type");
      }
      s.label = Label::make_genuine();
    } else if (fields[3] == "attack") {
      s.label.kind = LabelKind::attack;
      if (!fields[4].empty()) {
        try {
          s.label.pai_type = pai_type_from_string(fields[4]);
        } catch (const std::invalid_argument& e) {
          throw DataError(where + ": " + e.what());
        }
      }
    } else {
      throw DataError(where + ": label must be genuine or attack, got '" +
                      fields[3] + "'");
    }
    scores.push_back(std::move(s));
  }
  if (scores.empty()) throw DataError(path + ": no score rows");
  return scores;
}

inline ordered_json report_to_json(const EvalReport& report) {
  ordered_json j;
  j["higher_is_genuine"] = report.higher_is_genuine;
  j["threshold"] = report.threshold;
  j["dev"] = {{"far", report.dev_far},
              {"frr", report.dev_frr},
              {"eer", report.dev_eer},
              {"aer", report.aer}};
  j["test"] = {{"far", report.far},
               {"frr", report.frr},
               {"hter", report.hter}};
  j["apcer"] = ordered_json::object();
  for (const auto& [type, rate] : report.apcer) j["apcer"][type] = rate;
  if (!report.apcer_subtype.empty()) {
    j["apcer_subtype"] = ordered_json::object();
    for (const auto& [key, rate] : report.apcer_subtype) {
      j["apcer_subtype"][key] = rate;
    }
  }
  j["apcer_max"] = report.apcer_max;
  j["bpcer"] = report.bpcer;
  j["acer"] = report.acer;
  j["threshold_confusion"] = ordered_json::object();
  for (const auto& [row, fractions] : report.threshold_confusion) {
    j["threshold_confusion"][row] = {fractions[0], fractions[1]};
  }
  if (!report.prototype_confusion.empty()) {
    j["prototype_confusion"] = {{"rows", report.prototype_rows},
                                {"columns", report.prototype_classes},
                                {"matrix", report.prototype_confusion}};
  }
  return j;
}

inline void write_report_json(const EvalReport& report,
                              const std::string& path) {
  std::ofstream out = detail::open_out(path);
  out << report_to_json(report).dump(2) << "\n";
}

inline void write_confusion_csv(const EvalReport& report,
                                const std::string& path) {
  std::ofstream out = detail::open_out(path);
  if (!report.prototype_confusion.empty()) {
    out << "true_class";
    for (const std::string& c : report.prototype_classes) out << "," << c;
    out << "\n";
    for (std::size_t r = 0; r < report.prototype_rows.size(); ++r) {
      out << report.prototype_rows[r];
      for (double v : report.prototype_confusion[r]) {
        out << "," << format_double(v);
      }
      out << "\n";
    }
    return;
  }
  out << "true_class,sided_genuine,sided_attack\n";
  for (const auto& [row, fractions] : report.threshold_confusion) {
    out << row << "," << format_double(fractions[0]) << ","
        << format_double(fractions[1]) << "\n";
  }
}

// Checkpoints hold the encoder bit-for-bit plus the resolved config and
// seed that produced it.
inline void save_checkpoint(const EncoderParameters& params,
                            const ClassCenters& centers, const RunConfig& cfg,
                            const std::string& path) {
  ordered_json j;
  j["format"] = "anomet-checkpoint";
  j["version"] = kVersion;
  j["seed"] = cfg.seed;
  j["config"] = run_config_to_json(cfg);
  j["layers"] = ordered_json::array();
  for (const LayerParams& layer : params.layers) {
    j["layers"].push_back({{"in", layer.in},
                           {"out", layer.out},
                           {"weights", layer.weights},
                           {"bias", layer.bias}});
  }
  if (!centers.centers.empty()) {
    j["centers"] = ordered_json::object();
    for (const auto& [key, center] : centers.centers) {
      j["centers"][key] = center;
    }
  }
  std::ofstream out = detail::open_out(path);
  out << j.dump(2) << "\n";
}

struct Checkpoint {
  EncoderParameters params;
  ClassCenters centers;
  RunConfig config;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  ordered_json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": invalid checkpoint JSON: " + e.what());
  }
  if (!j.is_object() || j.value("format", "") != "anomet-checkpoint") {
    throw DataError(path + ": not a checkpoint file");
  }
  Checkpoint ckpt;
  try {
    ckpt.config = run_config_from_json(j.at("config"));
    for (const ordered_json& l : j.at("layers")) {
      LayerParams layer;
      layer.in = l.at("in").get<std::size_t>();
      layer.out = l.at("out").get<std::size_t>();
      layer.weights = l.at("weights").get<std::vector<double>>();
      layer.bias = l.at("bias").get<std::vector<double>>();
      if (layer.weights.size() != layer.in * layer.out ||
          layer.bias.size() != layer.out) {
        throw DataError(path + ": layer shape mismatch");
      }
      ckpt.params.layers.push_back(std::move(layer));
    }
    if (j.contains("centers")) {
      for (const auto& [key, center] : j.at("centers").items()) {
        ckpt.centers.centers[key] = center.get<std::vector<double>>();
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": malformed checkpoint: " + e.what());
  } catch (const std::invalid_argument& e) {
    throw DataError(path + ": malformed checkpoint: " + e.what());
  }
  if (ckpt.params.layers.empty()) {
    throw DataError(path + ": checkpoint has no layers");
  }
  EncoderConfig shape;
  shape.input_dim = ckpt.params.layers.front().in;
  shape.hidden_dims.clear();
  for (std::size_t l = 0; l + 1 < ckpt.params.layers.size(); ++l) {
    shape.hidden_dims.push_back(ckpt.params.layers[l].out);
  }
  shape.output_dim = ckpt.params.layers.back().out;
  ckpt.params.config = shape;
  for (std::size_t l = 0; l + 1 < ckpt.params.layers.size(); ++l) {
    if (ckpt.params.layers[l].out != ckpt.params.layers[l + 1].in) {
      throw DataError(path + ": layer dimensions do not chain");
    }
  }
  return ckpt;
}

inline void write_training_log(const TrainResult& result,
                               const TrainConfig& cfg,
                               const std::string& path) {
  std::ofstream out = detail::open_out(path);
  ordered_json header;
  header["log"] = "training";
  header["version"] = kVersion;
  header["loss"] = to_string(cfg.loss_kind);
  header["mode"] = to_string(cfg.mode);
  header["epochs"] = cfg.epochs;
  header["seed"] = cfg.seed;
  out << header.dump() << "\n";
  for (const EpochStats& e : result.epochs) {
    ordered_json row;
    row["epoch"] = e.epoch;
    row["mean_batch_loss"] = e.mean_batch_loss;
    row["batches"] = e.batches;
    row["triplets"] = e.triplets;
    row["fallbacks"] = e.fallbacks;
    row["skipped_pairs"] = e.skipped_pairs;
    if (!std::isnan(e.dev_metric)) row["dev_metric"] = e.dev_metric;
    out << row.dump() << "\n";
  }
}

inline std::uint64_t fnv1a64_file(const std::string& path) {
  std::ifstream in = detail::open_in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return fnv1a64(ss.str());
}

// Written last: records the resolved config, its hash, and a hash of
// every produced file, so the run can be replayed and checked.
inline void write_manifest(
    const std::string& path, const std::string& command, const RunConfig& cfg,
    const std::map<std::string, std::string>& outputs,
    const std::map<std::string, std::string>& inputs = {},
    const ordered_json& parameters = ordered_json()) {
  ordered_json j;
  j["manifest_version"] = kVersion;
  j["command"] = command;
  j["seed"] = cfg.seed;
  if (parameters.is_object() && !parameters.empty()) {
    j["parameters"] = parameters;
  }
  const ordered_json resolved = run_config_to_json(cfg);
  j["config_hash"] = hex64(fnv1a64(resolved.dump()));
  j["resolved_config"] = resolved;
  if (!inputs.empty()) {
    j["inputs"] = ordered_json::object();
    for (const auto& [name, file_path] : inputs) {
      j["inputs"][name] = hex64(fnv1a64_file(file_path));
    }
  }
  j["outputs"] = ordered_json::object();
  for (const auto& [name, file_path] : outputs) {
    j["outputs"][name] = hex64(fnv1a64_file(file_path));
  }
  std::ofstream out = detail::open_out(path);
  out << j.dump(2) << "\n";
}

}  // namespace anomet
