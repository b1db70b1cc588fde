#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "anomet/eval.hpp"
#include "anomet/rng.hpp"
#include "support/oracles.hpp"

using namespace anomet;

namespace {

ScoreSet make_set(const std::vector<double>& genuine,
                  const std::vector<double>& attacks,
                  bool higher_is_genuine = true) {
  ScoreSet s;
  s.higher_is_genuine = higher_is_genuine;
  int k = 0;
  for (double v : genuine) {
    s.entries.push_back(
        {"g" + std::to_string(k++), v, Label::make_genuine()});
  }
  for (double v : attacks) {
    s.entries.push_back({"a" + std::to_string(k++), v,
                         Label::make_attack(PaiType::print, "low")});
  }
  return s;
}

// Random two-split score material with ties and mixed attack types.
struct RandomScores {
  ScoreSet dev;
  ScoreSet test;
};

RandomScores random_scores(Rng& rng) {
  const bool higher = rng.uniform() < 0.5;
  const double flip = higher ? 1.0 : -1.0;
  const auto fill = [&](ScoreSet& s, std::size_t genuine, std::size_t attacks,
                        const char* prefix) {
    s.higher_is_genuine = higher;
    for (std::size_t i = 0; i < genuine; ++i) {
      double v = 1.0 + 0.8 * rng.gaussian();
      if (rng.uniform() < 0.5) v = std::round(v * 10.0) / 10.0;
      s.entries.push_back({std::string(prefix) + "g" + std::to_string(i),
                           flip * v, Label::make_genuine()});
    }
    const PaiType types[] = {PaiType::print, PaiType::replay, PaiType::mask};
    for (std::size_t i = 0; i < attacks; ++i) {
      const PaiType t = types[rng.index(3)];
      const std::string& subtype =
          pai_subtypes(t)[rng.index(pai_subtypes(t).size())];
      double v = 0.8 * rng.gaussian();
      if (rng.uniform() < 0.5) v = std::round(v * 10.0) / 10.0;
      s.entries.push_back({std::string(prefix) + "a" + std::to_string(i),
                           flip * v, Label::make_attack(t, subtype)});
    }
  };
  RandomScores out;
  fill(out.dev, 5 + rng.index(30), 5 + rng.index(30), "d");
  fill(out.test, 5 + rng.index(30), 5 + rng.index(30), "t");
  return out;
}

}  // namespace

TEST_CASE("threshold rates count ties as accepts") {
  const ScoreSet s = make_set({0.9, 0.7, 0.4}, {0.5, 0.3, 0.2, 0.1});
  const Rates r = rates_at_threshold(s, 0.5);
  CHECK(r.far == Catch::Approx(0.25));  // the 0.5 attack is accepted
  CHECK(r.frr == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("threshold rates flip with the orientation") {
  const ScoreSet s =
      make_set({-0.9, -0.7, -0.4}, {-0.5, -0.3, -0.2, -0.1}, false);
  const Rates r = rates_at_threshold(s, -0.5);
  CHECK(r.far == Catch::Approx(0.25));
  CHECK(r.frr == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("a separable set reaches zero eer between the classes") {
  const EerResult r = eer_threshold(make_set({0.8, 0.9}, {0.1, 0.2}));
  CHECK(r.eer == 0.0);
  CHECK(r.threshold == Catch::Approx(0.5));
}

TEST_CASE("eer lands at the balanced crossing of an overlapped set") {
  const EerResult r =
      eer_threshold(make_set({0.9, 0.6, 0.3}, {0.7, 0.4, 0.1}));
  CHECK(r.threshold == Catch::Approx(0.5));
  CHECK(r.far == Catch::Approx(1.0 / 3.0));
  CHECK(r.frr == Catch::Approx(1.0 / 3.0));
  CHECK(r.eer == Catch::Approx(1.0 / 3.0));
}

TEST_CASE("exact ties resolve toward the smaller threshold") {
  // a single shared score leaves only the two sentinel candidates,
  // which tie on gap and total
  const EerResult r = eer_threshold(make_set({0.5}, {0.5}));
  CHECK(r.threshold == Catch::Approx(-0.5));
  CHECK(r.eer == Catch::Approx(0.5));
}

TEST_CASE("degenerate score sets are rejected") {
  ScoreSet genuine_only;
  genuine_only.entries.push_back({"g0", 1.0, Label::make_genuine()});
  CHECK_THROWS_AS(eer_threshold(genuine_only), DataError);
  CHECK_THROWS_AS(rates_at_threshold(genuine_only, 0.5), DataError);
  ScoreSet with_nan = make_set({0.5}, {0.1});
  with_nan.entries[0].score = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(eer_threshold(with_nan), DataError);
}

TEST_CASE("report identities hold against the recount oracle") {
  Rng rng(2024);
  for (int rep = 0; rep < 50; ++rep) {
    const RandomScores s = random_scores(rng);
    const EvalReport report = pad_report(s.dev, s.test);

    CHECK(report.dev_far == oracles::recount_far(s.dev, report.threshold));
    CHECK(report.dev_frr == oracles::recount_frr(s.dev, report.threshold));
    CHECK(report.aer == (report.dev_far + report.dev_frr) / 2.0);
    CHECK(report.dev_eer == report.aer);

    CHECK(report.far == oracles::recount_far(s.test, report.threshold));
    CHECK(report.frr == oracles::recount_frr(s.test, report.threshold));
    CHECK(report.hter == (report.far + report.frr) / 2.0);
    CHECK(report.bpcer == report.frr);

    const auto apcer = oracles::recount_apcer(s.test, report.threshold);
    REQUIRE(report.apcer.size() == apcer.size());
    double apcer_max = 0.0;
    for (const auto& [type, rate] : apcer) {
      CHECK(report.apcer.at(type) == rate);
      apcer_max = std::max(apcer_max, rate);
    }
    CHECK(report.apcer_max == apcer_max);
    CHECK(report.acer == (report.apcer_max + report.bpcer) / 2.0);

    for (const auto& [row, split] : report.threshold_confusion) {
      (void)row;
      CHECK(split[0] + split[1] == Catch::Approx(1.0).margin(1e-12));
    }
  }
}

TEST_CASE("report validates orientation and attack typing") {
  ScoreSet dev = make_set({0.8, 0.9}, {0.1, 0.2});
  ScoreSet test = make_set({0.7}, {0.3});
  test.higher_is_genuine = false;
  CHECK_THROWS_AS(pad_report(dev, test), DataError);

  test.higher_is_genuine = true;
  test.entries.push_back({"untyped", 0.2, [] {
                            Label l;
                            l.kind = LabelKind::attack;
                            return l;
                          }()});
  CHECK_THROWS_AS(pad_report(dev, test), DataError);
}

TEST_CASE("subtype apcer requires and reports the leaf breakdown") {
  ScoreSet dev = make_set({0.8, 0.9}, {0.1, 0.2});
  ScoreSet test;
  test.entries.push_back({"g0", 0.9, Label::make_genuine()});
  test.entries.push_back(
      {"a0", 0.1, Label::make_attack(PaiType::print, "low")});
  test.entries.push_back(
      {"a1", 0.8, Label::make_attack(PaiType::print, "high")});
  PadReportOptions options;
  options.subtype_apcer = true;
  const EvalReport report = pad_report(dev, test, options);
  REQUIRE(report.apcer_subtype.size() == 2);
  CHECK(report.apcer_subtype.at("print/low") == 0.0);
  CHECK(report.apcer_subtype.at("print/high") == 1.0);
  CHECK(report.apcer.at("print") == Catch::Approx(0.5));
}
