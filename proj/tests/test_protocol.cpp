#include <catch2/catch_amalgamated.hpp>
#include <algorithm>
#include <set>

#include "anomet/protocol.hpp"
#include "support/oracles.hpp"

using namespace anomet;

namespace {

const Benchmark& bench() {
  static const Benchmark b = generate(oracles::tiny_benchmark(19));
  return b;
}

PipelineConfig fast_pipeline() {
  PipelineConfig cfg;
  cfg.train.encoder.input_dim = 8;
  cfg.train.encoder.hidden_dims = {16, 16};
  cfg.train.encoder.output_dim = 8;
  cfg.train.miner.pool_size = 32;
  cfg.train.miner.triplets_per_batch = 6;
  cfg.train.epochs = 3;
  cfg.train.seed = 7;
  return cfg;
}

}  // namespace

TEST_CASE("the intra protocol keeps the declared splits") {
  ProtocolSpec spec;
  const SplitView view = apply_protocol_split(bench().samples, spec);
  std::size_t train = 0, dev = 0, test = 0;
  for (const Sample& s : bench().samples) {
    if (s.split == Split::train) ++train;
    if (s.split == Split::dev) ++dev;
    if (s.split == Split::test) ++test;
  }
  CHECK(view.train.size() == train);
  CHECK(view.dev.size() == dev);
  CHECK(view.test.size() == test);
}

TEST_CASE("intra rejects holdout selectors") {
  ProtocolSpec spec;
  spec.holdout_tag = "mobile";
  CHECK_THROWS_AS(apply_protocol_split(bench().samples, spec),
                  std::invalid_argument);
}

TEST_CASE("a domain holdout claims every matching sample for test") {
  ProtocolSpec spec;
  spec.kind = ProtocolKind::holdout;
  spec.holdout_tag = "mobile";
  const SplitView view = apply_protocol_split(bench().samples, spec);
  std::size_t mobile_total = 0;
  for (const Sample& s : bench().samples) {
    if (s.domain_tag == "mobile") ++mobile_total;
  }
  CHECK(view.test.size() == mobile_total);
  for (const Sample& s : view.test) CHECK(s.domain_tag == "mobile");
  for (const Sample& s : view.train) CHECK(s.domain_tag != "mobile");
  for (const Sample& s : view.dev) CHECK(s.domain_tag != "mobile");
  // declared-test samples from other domains are dropped entirely
  std::set<std::string> seen;
  for (const auto* split : {&view.train, &view.dev, &view.test}) {
    for (const Sample& s : *split) seen.insert(s.id);
  }
  for (const Sample& s : bench().samples) {
    if (s.split == Split::test && s.domain_tag != "mobile") {
      CHECK(seen.count(s.id) == 0);
    }
  }
}

TEST_CASE("an attack holdout pools matching attacks against test genuine") {
  ProtocolSpec spec;
  spec.kind = ProtocolKind::holdout;
  spec.holdout_pai = pai_selector_from_string("replay");
  const SplitView view = apply_protocol_split(bench().samples, spec);
  std::size_t replay_total = 0, genuine_test = 0;
  for (const Sample& s : bench().samples) {
    if (s.label.is_attack() && *s.label.pai_type == PaiType::replay) {
      ++replay_total;
    }
    if (s.label.is_genuine() && s.split == Split::test) ++genuine_test;
  }
  CHECK(view.test.size() == replay_total + genuine_test);
  for (const Sample& s : view.train) {
    CHECK((s.label.is_genuine() || *s.label.pai_type != PaiType::replay));
  }
  for (const Sample& s : view.dev) {
    CHECK((s.label.is_genuine() || *s.label.pai_type != PaiType::replay));
  }
}

TEST_CASE("a subtype holdout matches only its leaf") {
  ProtocolSpec spec;
  spec.kind = ProtocolKind::holdout;
  spec.holdout_pai = pai_selector_from_string("print/low");
  const SplitView view = apply_protocol_split(bench().samples, spec);
  for (const Sample& s : view.test) {
    if (s.label.is_attack()) {
      CHECK(class_key(s.label) == "print/low");
    }
  }
}

TEST_CASE("selectors that match nothing are data errors") {
  ProtocolSpec spec;
  spec.kind = ProtocolKind::holdout;
  spec.holdout_tag = "underwater";
  CHECK_THROWS_AS(apply_protocol_split(bench().samples, spec), DataError);
  spec.holdout_tag.reset();
  // the taxonomy admits print/high but this benchmark has none
  spec.holdout_pai = pai_selector_from_string("print/high");
  CHECK_THROWS_AS(apply_protocol_split(bench().samples, spec), DataError);
  spec.holdout_pai.reset();
  CHECK_THROWS_AS(apply_protocol_split(bench().samples, spec),
                  std::invalid_argument);
  CHECK_THROWS_AS(pai_selector_from_string("hologram"),
                  std::invalid_argument);
}

TEST_CASE("the full pipeline produces a coherent intra report") {
  const ProtocolResult result =
      run_protocol(bench(), ProtocolSpec{}, fast_pipeline());
  CHECK(result.report.higher_is_genuine);
  CHECK(result.dev_scores.size() == result.splits.dev.size());
  CHECK(result.test_scores.size() == result.splits.test.size());
  CHECK(result.refs.pair_count == 3);
  CHECK(result.report.hter >= 0.0);
  CHECK(result.report.hter <= 1.0);
  CHECK(result.report.apcer.size() == 3);

  // nearest-prototype confusion: genuine plus each test attack type,
  // rows normalized
  REQUIRE_FALSE(result.report.prototype_confusion.empty());
  CHECK(std::find(result.report.prototype_rows.begin(),
                  result.report.prototype_rows.end(),
                  "genuine") != result.report.prototype_rows.end());
  for (const auto& row : result.report.prototype_confusion) {
    double sum = 0.0;
    for (double v : row) sum += v;
    CHECK(sum == Catch::Approx(1.0).margin(1e-9));
  }
}

TEST_CASE("paper-literal scoring flips the report orientation") {
  PipelineConfig cfg = fast_pipeline();
  cfg.train.loss.softmax_sign = SoftmaxSign::paper_literal;
  const ProtocolResult result =
      run_protocol(bench(), ProtocolSpec{}, cfg);
  CHECK_FALSE(result.report.higher_is_genuine);
}

TEST_CASE("a held-out attack type appears as a row without a column") {
  ProtocolSpec spec;
  spec.kind = ProtocolKind::holdout;
  spec.holdout_pai = pai_selector_from_string("replay");
  const ProtocolResult result = run_protocol(bench(), spec, fast_pipeline());
  const auto& rows = result.report.prototype_rows;
  const auto& cols = result.report.prototype_classes;
  CHECK(std::find(rows.begin(), rows.end(), "replay") != rows.end());
  CHECK(std::find(cols.begin(), cols.end(), "replay") == cols.end());
}
