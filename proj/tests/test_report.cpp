#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <string>

#include "topk_uncert/report.hpp"
#include "topk_uncert/synthgen.hpp"

using namespace topk_uncert;

namespace {

Dataset small_dataset() {
  GeneratorConfig cfg;
  cfg.vocab_size = 10;
  cfg.n_samples = 50;
  cfg.m_runs = 3;
  cfg.k = 5;
  cfg.concentration = 2.0;
  cfg.seed = 2024;
  return generate_dataset(cfg);
}

}  // namespace

TEST_CASE("grid spec parses, validates, and hits both endpoints") {
  const GridSpec g = GridSpec::parse("0:1:0.01");
  const auto pts = g.points();
  REQUIRE(pts.size() == 101);
  CHECK(pts.front() == 0.0);
  CHECK(pts.back() == 1.0);
  CHECK(pts == default_threshold_grid());

  CHECK_THROWS_AS(GridSpec::parse("nonsense"), InvalidArgumentError);
  CHECK_THROWS_AS(GridSpec::parse("0:2:0.1"), InvalidArgumentError);
  CHECK_THROWS_AS(GridSpec::parse("0:1:0"), InvalidArgumentError);

  const GridSpec single = GridSpec::parse("0.5:0.5:0.1");
  REQUIRE(single.points().size() == 1);
  CHECK(single.points()[0] == 0.5);
}

TEST_CASE("report building is exactly invariant to the worker count") {
  const Dataset ds = small_dataset();
  RunManifest manifest;
  manifest.input_path = "mem";
  manifest.content_hash = fnv1a64_hex("x");

  std::string serialized[3];
  std::size_t threads[3] = {1, 3, 8};
  for (int i = 0; i < 3; ++i) {
    EvalOptions opt;
    opt.strategy = StrategyId::kPairRank;
    opt.k = 5;
    opt.threads = threads[i];
    manifest.strategy = opt.strategy;
    manifest.k = opt.k;
    serialized[i] = to_canonical_json(build_eval_report(ds, opt, manifest));
  }
  CHECK(serialized[0] == serialized[1]);
  CHECK(serialized[0] == serialized[2]);
}

TEST_CASE("canonical json is stable and carries the manifest") {
  const Dataset ds = small_dataset();
  EvalOptions opt;
  opt.strategy = StrategyId::kConsistency;
  opt.k = 5;
  RunManifest manifest;
  manifest.strategy = opt.strategy;
  manifest.k = opt.k;
  manifest.input_path = "data.jsonl";
  manifest.seed = 2024;
  manifest.content_hash = fnv1a64_hex("body");

  const EvalReport report = build_eval_report(ds, opt, manifest);
  const std::string a = to_canonical_json(report);
  const std::string b = to_canonical_json(build_eval_report(ds, opt, manifest));
  CHECK(a == b);
  CHECK(a.find("\"strategy\":\"consistency\"") != std::string::npos);
  CHECK(a.find("\"seed\":2024") != std::string::npos);
  CHECK(a.find("\"tool_version\":\"") != std::string::npos);
  CHECK(a.find("\"content_hash\":\"fnv1a64:") != std::string::npos);

  // Undefined selective accuracy serializes as null, never as a number. The
  // pairrank softmax keeps every execution confidence below 1, so the tau = 1
  // grid point retains nothing.
  EvalOptions pr_opt = opt;
  pr_opt.strategy = StrategyId::kPairRank;
  const std::string pr = to_canonical_json(build_eval_report(ds, pr_opt, manifest));
  CHECK(pr.find("\"selective_accuracy\":null") != std::string::npos);
}

TEST_CASE("csv companions have one row per grid point, k, and rank") {
  const Dataset ds = small_dataset();
  EvalOptions opt;
  opt.strategy = StrategyId::kSingleRun;
  opt.k = 5;
  RunManifest manifest;
  const EvalReport report = build_eval_report(ds, opt, manifest);

  auto lines = [](const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += c == '\n' ? 1 : 0;
    return n;
  };
  CHECK(lines(selective_csv(report)) == 1 + 101);
  CHECK(lines(set_ece_csv(report)) == 1 + 5);
  CHECK(lines(rankwise_csv(report)) == 1 + 5);
}

TEST_CASE("report metrics embed the per-module results") {
  const Dataset ds = small_dataset();
  EvalOptions opt;
  opt.strategy = StrategyId::kConsistency;
  opt.k = 5;
  const EvalReport report = build_eval_report(ds, opt, RunManifest{});

  REQUIRE(report.recall_curve.size() == 5);
  CHECK(report.recall_curve.front().first == 1);
  CHECK(report.recall_curve.front().second == report.top1);
  REQUIRE(report.set_ece_curve.size() == 5);
  CHECK(report.selective.points.size() == 101);
  CHECK(report.geometry.per_rank_stats.size() == 5);
  // Recall nondecreasing along the curve.
  for (std::size_t i = 1; i < report.recall_curve.size(); ++i) {
    CHECK(report.recall_curve[i].second >= report.recall_curve[i - 1].second);
  }
}

TEST_CASE("fnv1a64 content hash is stable") {
  CHECK(fnv1a64_hex("") == "fnv1a64:cbf29ce484222325");
  CHECK(fnv1a64_hex("a") == "fnv1a64:af63dc4c8601ec8c");
  CHECK(fnv1a64_hex("abc") != fnv1a64_hex("abd"));
}
