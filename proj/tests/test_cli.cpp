#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

#include "anomet/anomet.hpp"
#include "support/oracles.hpp"

using namespace anomet;
namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run_cli(const std::string& args) {
  const std::string command = std::string(ANOMET_CLI_PATH) + " " + args +
                              " 2>&1";
  RunResult result;
  FILE* pipe = popen(command.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[512];
  while (fgets(buf, sizeof(buf), pipe)) result.output += buf;
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

struct Workspace {
  fs::path path;
  Workspace() {
    path = fs::temp_directory_path() /
           ("anomet-cli-" + std::to_string(::getpid()) + "-" +
            std::to_string(next()));
    fs::create_directories(path);
  }
  ~Workspace() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  std::string file(const std::string& name) const {
    return (path / name).string();
  }
  static std::size_t next() {
    static std::size_t n = 0;
    return n++;
  }
};

std::string write_config(const Workspace& ws, std::uint64_t seed) {
  RunConfig cfg;
  cfg.seed = seed;
  cfg.generate_spec = oracles::tiny_benchmark(seed);
  cfg.pipeline.train.encoder.hidden_dims = {16, 16};
  cfg.pipeline.train.encoder.output_dim = 8;
  cfg.pipeline.train.miner.pool_size = 32;
  cfg.pipeline.train.miner.triplets_per_batch = 6;
  cfg.pipeline.train.epochs = 2;
  const std::string path = ws.file("config.json");
  std::ofstream out(path);
  out << run_config_to_json(cfg).dump(2) << "\n";
  return path;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("generate writes the benchmark files and a manifest") {
  Workspace ws;
  const std::string config = write_config(ws, 23);
  const RunResult r = run_cli("generate --config " + config + " --out " +
                              ws.file("gen"));
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(ws.file("gen/benchmark.jsonl")));
  CHECK(fs::exists(ws.file("gen/benchmark.csv")));
  CHECK(fs::exists(ws.file("gen/manifest.json")));
  const Benchmark back = ingest_benchmark_jsonl(ws.file("gen/benchmark.jsonl"));
  CHECK(back.samples.size() == 120 + 3 * 48);
}

TEST_CASE("train then evaluate completes the round trip") {
  Workspace ws;
  const std::string config = write_config(ws, 29);
  const RunResult train = run_cli("train --config " + config + " --out " +
                                  ws.file("run"));
  INFO(train.output);
  REQUIRE(train.exit_code == 0);
  CHECK(train.output.find("final dev AER") != std::string::npos);
  REQUIRE(fs::exists(ws.file("run/checkpoint.json")));
  CHECK(fs::exists(ws.file("run/train_log.jsonl")));
  CHECK(fs::exists(ws.file("run/train_summary.json")));
  CHECK(fs::exists(ws.file("run/manifest.json")));

  const RunResult eval =
      run_cli("evaluate --checkpoint " + ws.file("run/checkpoint.json") +
              " --out " + ws.file("eval"));
  INFO(eval.output);
  REQUIRE(eval.exit_code == 0);
  REQUIRE(fs::exists(ws.file("eval/report.json")));
  CHECK(fs::exists(ws.file("eval/scores_dev.csv")));
  CHECK(fs::exists(ws.file("eval/scores_test.csv")));
  CHECK(fs::exists(ws.file("eval/confusion.csv")));

  // the report command recomputes the same threshold metrics from the
  // score files alone
  const RunResult rep =
      run_cli("report --dev " + ws.file("eval/scores_dev.csv") + " --test " +
              ws.file("eval/scores_test.csv") + " --out " + ws.file("rep"));
  INFO(rep.output);
  REQUIRE(rep.exit_code == 0);
  ordered_json from_eval =
      ordered_json::parse(slurp(ws.file("eval/report.json")));
  ordered_json from_csv =
      ordered_json::parse(slurp(ws.file("rep/report.json")));
  CHECK(from_eval.at("threshold") == from_csv.at("threshold"));
  CHECK(from_eval.at("test") == from_csv.at("test"));
  CHECK(from_eval.at("acer") == from_csv.at("acer"));
}

TEST_CASE("the same config and seed give identical checkpoints") {
  Workspace ws;
  const std::string config = write_config(ws, 31);
  REQUIRE(run_cli("train --config " + config + " --out " + ws.file("a"))
              .exit_code == 0);
  REQUIRE(run_cli("train --config " + config + " --out " + ws.file("b"))
              .exit_code == 0);
  CHECK(slurp(ws.file("a/checkpoint.json")) ==
        slurp(ws.file("b/checkpoint.json")));
  CHECK(slurp(ws.file("a/train_log.jsonl")) ==
        slurp(ws.file("b/train_log.jsonl")));
}

TEST_CASE("zero epochs checkpoint the untouched initialization") {
  Workspace ws;
  const std::string config = write_config(ws, 37);
  REQUIRE(run_cli("train --config " + config + " --epochs 0 --out " +
                  ws.file("zero"))
              .exit_code == 0);
  const Checkpoint ckpt = load_checkpoint(ws.file("zero/checkpoint.json"));
  Rng init_rng(derive_seed(37, "init"));
  const EncoderParameters fresh =
      init_encoder(ckpt.config.pipeline.train.encoder, init_rng);
  REQUIRE(ckpt.params.layers.size() == fresh.layers.size());
  for (std::size_t l = 0; l < fresh.layers.size(); ++l) {
    CHECK(ckpt.params.layers[l].weights == fresh.layers[l].weights);
  }
}

TEST_CASE("flag overrides reach the resolved config") {
  Workspace ws;
  const std::string config = write_config(ws, 41);
  const RunResult r = run_cli(
      "train --config " + config +
      " --loss triplet --mode classwise --M 2 --softmax-sign paper --out " +
      ws.file("flags"));
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  const Checkpoint ckpt = load_checkpoint(ws.file("flags/checkpoint.json"));
  CHECK(ckpt.config.pipeline.train.loss_kind == LossKind::triplet);
  CHECK(ckpt.config.pipeline.train.mode == MiningMode::classwise);
  CHECK(ckpt.config.pipeline.fewshot_m == 2);
  CHECK(ckpt.config.pipeline.train.loss.softmax_sign ==
        SoftmaxSign::paper_literal);
}

TEST_CASE("usage errors and missing data map to distinct exit codes") {
  Workspace ws;
  CHECK(run_cli("trian").exit_code == 1);  // unknown subcommand
  CHECK(run_cli("train --no-such-flag").exit_code == 1);
  CHECK(run_cli("report --dev missing.csv --test missing.csv --out " +
                ws.file("r"))
            .exit_code == 2);
  CHECK(run_cli("evaluate --checkpoint " + ws.file("absent.json") +
                " --out " + ws.file("e"))
            .exit_code == 2);
  CHECK(run_cli("--help").exit_code == 0);
  const std::string config = write_config(ws, 43);
  CHECK(run_cli("train --config " + config + " --loss bogus --out " +
                ws.file("x"))
            .exit_code == 1);
}

TEST_CASE("an ablation sweep writes per-seed and median tables") {
  Workspace ws;
  const std::string config = write_config(ws, 47);
  const RunResult r = run_cli("ablation --config " + config +
                              " --seeds 5,6 --epochs 1 --out " +
                              ws.file("abl"));
  INFO(r.output);
  REQUIRE(r.exit_code == 0);
  REQUIRE(fs::exists(ws.file("abl/ablation.csv")));
  REQUIRE(fs::exists(ws.file("abl/ablation_median.csv")));
  CHECK(fs::exists(ws.file("abl/ablation.txt")));
  const std::string csv = slurp(ws.file("abl/ablation.csv"));
  // 2 seeds x 4 variants plus the header
  std::size_t lines = 0;
  for (char c : csv) {
    if (c == '\n') ++lines;
  }
  CHECK(lines == 9);
  CHECK(csv.find("baseline") != std::string::npos);
  CHECK(csv.find("ours") != std::string::npos);
  const ordered_json manifest =
      ordered_json::parse(slurp(ws.file("abl/manifest.json")));
  CHECK(manifest.at("parameters").at("seeds") ==
        ordered_json::array({5, 6}));
}
