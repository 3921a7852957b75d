#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "topk_uncert/metrics.hpp"

using namespace topk_uncert;

namespace {

AggregatedPrediction prediction(std::vector<std::pair<std::string, double>> entries) {
  AggregatedPrediction p;
  for (auto& [label, conf] : entries) {
    p.entries.push_back({canonicalize_label(label), conf});
  }
  return p;
}

EvaluatedSample sample(const std::string& truth,
                       std::vector<std::pair<std::string, double>> entries,
                       const std::string& id = "s") {
  return EvaluatedSample::from(id, canonicalize_label(truth), prediction(std::move(entries)));
}

// Sample whose top-1 prediction has the given confidence and correctness.
EvaluatedSample top1_sample(double conf, bool correct, int id) {
  return sample(correct ? "hit" : "miss", {{"hit", conf}}, "s" + std::to_string(id));
}

// Direct-summation Set-ECE oracle, independent of the library's binning
// helpers: recomputes membership, mean confidence, and bin assignment from
// scratch.
double set_ece_oracle(const std::vector<EvaluatedSample>& samples, std::size_t k,
                      std::size_t bins) {
  const double width = 1.0 / static_cast<double>(bins);
  double ece = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    const double lo = static_cast<double>(b) * width;
    const double hi = static_cast<double>(b + 1) * width;
    double conf_sum = 0.0;
    double z_sum = 0.0;
    std::size_t count = 0;
    for (const auto& s : samples) {
      const auto& entries = s.prediction().entries;
      const std::size_t take = std::min(k, entries.size());
      double cbar = 0.0;
      for (std::size_t i = 0; i < take; ++i) cbar += entries[i].confidence;
      cbar /= static_cast<double>(take);
      const bool in_bin = b + 1 == bins ? (cbar >= lo && cbar <= 1.0) : (cbar >= lo && cbar < hi);
      if (!in_bin) continue;
      ++count;
      conf_sum += cbar;
      bool hit = false;
      for (std::size_t i = 0; i < take; ++i) {
        if (entries[i].action == s.ground_truth()) hit = true;
      }
      z_sum += hit ? 1.0 : 0.0;
    }
    if (count == 0) continue;
    const auto nb = static_cast<double>(count);
    ece += nb / static_cast<double>(samples.size()) * std::abs(z_sum / nb - conf_sum / nb);
  }
  return ece;
}

}  // namespace

TEST_CASE("top1 accuracy counts exact rank-1 matches") {
  std::vector<EvaluatedSample> samples{top1_sample(0.9, true, 0), top1_sample(0.9, false, 1)};
  CHECK(top1_accuracy(samples) == 0.5);
  samples = {top1_sample(0.5, true, 0), top1_sample(0.5, true, 1)};
  CHECK(top1_accuracy(samples) == 1.0);
  const std::vector<EvaluatedSample> empty;
  CHECK_THROWS_AS(top1_accuracy(empty), EmptyEvaluationError);
}

TEST_CASE("recall at k is prefix membership") {
  std::vector<std::pair<std::string, double>> entries;
  for (int i = 0; i < 10; ++i) {
    entries.push_back({"filler " + std::to_string(i), 0.1});
  }
  entries[6] = {"truth", 0.1};  // rank 7
  const std::vector<EvaluatedSample> samples{sample("truth", entries)};
  CHECK(recall_at_k(samples, 10) == 1.0);
  CHECK(recall_at_k(samples, 5) == 0.0);
  CHECK_THROWS_AS(recall_at_k(samples, 0), InvalidKError);
}

TEST_CASE("recall is monotone in k and matches top1 at k = 1") {
  std::mt19937_64 gen(3);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<EvaluatedSample> samples;
    const std::size_t n = 1 + gen() % 20;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::pair<std::string, double>> entries;
      const std::size_t len = 1 + gen() % 6;
      for (std::size_t r = 0; r < len; ++r) {
        entries.push_back({"w" + std::to_string(gen() % 8),
                           static_cast<double>(gen() % 1001) / 1000.0});
      }
      samples.push_back(sample("w" + std::to_string(gen() % 8), entries,
                               "s" + std::to_string(i)));
    }
    double prev = 0.0;
    for (std::size_t k = 1; k <= 6; ++k) {
      const double r = recall_at_k(samples, k);
      CHECK(r >= prev);
      prev = r;
    }
    CHECK(recall_at_k(samples, 1) == top1_accuracy(samples));
  }
}

TEST_CASE("set correctness is monotone in k") {
  std::mt19937_64 gen(5);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<std::pair<std::string, double>> entries;
    const std::size_t len = 1 + gen() % 8;
    for (std::size_t r = 0; r < len; ++r) {
      entries.push_back({"w" + std::to_string(gen() % 5), 0.5});
    }
    const auto s = sample("w" + std::to_string(gen() % 5), entries);
    bool seen = false;
    for (std::size_t k = 1; k <= len + 2; ++k) {
      const bool z = s.set_correct_at(k);
      CHECK((!seen || z));  // once true, stays true
      seen = z;
    }
  }
}

TEST_CASE("ece_top1 matches the hand-evaluated four-sample fixture") {
  const std::vector<EvaluatedSample> samples{
      top1_sample(0.95, true, 0), top1_sample(0.55, false, 1), top1_sample(0.65, true, 2),
      top1_sample(0.25, false, 3)};
  const auto report = ece_top1(samples, 10);
  CHECK_THAT(report.ece, Catch::Matchers::WithinAbs(0.30, 1e-12));

  std::size_t total = 0;
  double recomputed = 0.0;
  for (const auto& b : report.bins) {
    total += b.count;
    if (b.count > 0) {
      recomputed += static_cast<double>(b.count) / 4.0 *
                    std::abs(b.empirical_accuracy - b.mean_confidence);
    }
  }
  CHECK(total == samples.size());
  CHECK_THAT(report.ece, Catch::Matchers::WithinAbs(recomputed, 1e-12));
}

TEST_CASE("ece_top1 saturation cases") {
  CHECK(ece_top1(std::vector<EvaluatedSample>{top1_sample(1.0, true, 0),
                                              top1_sample(1.0, true, 1)},
                 10)
            .ece == 0.0);
  CHECK(ece_top1(std::vector<EvaluatedSample>{top1_sample(1.0, false, 0)}, 10).ece == 1.0);
}

TEST_CASE("ece is zero at the bin-level fixed point") {
  // Within the single occupied bin, empirical accuracy equals mean confidence.
  const std::vector<EvaluatedSample> samples{
      top1_sample(0.25, true, 0), top1_sample(0.25, false, 1), top1_sample(0.25, false, 2),
      top1_sample(0.25, false, 3)};
  CHECK(ece_top1(samples, 10).ece == 0.0);
}

TEST_CASE("interior bin boundaries belong to the upper bin") {
  const auto report = ece_top1(std::vector<EvaluatedSample>{top1_sample(0.3, true, 0)}, 10);
  CHECK(report.bins[3].count == 1);  // [0.3, 0.4), not [0.2, 0.3)
  const auto last = ece_top1(std::vector<EvaluatedSample>{top1_sample(1.0, true, 0)}, 10);
  CHECK(last.bins[9].count == 1);  // last bin right-closed
}

TEST_CASE("set_ece matches the hand-evaluated single-sample fixture") {
  const std::vector<EvaluatedSample> samples{sample("a", {{"a", 0.8}, {"b", 0.6}})};
  CHECK_THAT(set_ece(samples, 2, 10).ece, Catch::Matchers::WithinAbs(0.30, 1e-12));
}

TEST_CASE("set_ece is zero for perfectly calibrated saturated sets") {
  const std::vector<EvaluatedSample> samples{sample("a", {{"a", 1.0}, {"b", 1.0}}, "s0"),
                                             sample("c", {{"c", 1.0}, {"d", 1.0}}, "s1")};
  CHECK(set_ece(samples, 2, 10).ece == 0.0);
}

TEST_CASE("set_ece agrees with the direct-summation oracle") {
  std::mt19937_64 gen(7);
  for (int iter = 0; iter < 300; ++iter) {
    std::vector<EvaluatedSample> samples;
    const std::size_t n = 1 + gen() % 20;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::pair<std::string, double>> entries;
      const std::size_t len = 1 + gen() % 6;
      for (std::size_t r = 0; r < len; ++r) {
        entries.push_back({"w" + std::to_string(gen() % 6),
                           static_cast<double>(gen() % 1001) / 1000.0});
      }
      samples.push_back(sample("w" + std::to_string(gen() % 6), entries,
                               "s" + std::to_string(i)));
    }
    const std::size_t k = 1 + gen() % 6;
    const std::size_t bins = 1 + gen() % 5;
    CHECK_THAT(set_ece(samples, k, bins).ece,
               Catch::Matchers::WithinAbs(set_ece_oracle(samples, k, bins), 1e-12));
  }
}

TEST_CASE("set_ece_curve starts at the k = 1 value") {
  const std::vector<EvaluatedSample> samples{sample("a", {{"a", 0.8}, {"b", 0.6}})};
  const auto curve = set_ece_curve(samples, 2, 10);
  REQUIRE(curve.size() == 2);
  CHECK(curve[0].first == 1);
  CHECK(curve[0].second == set_ece(samples, 1, 10).ece);
  CHECK(curve[1].second == set_ece(samples, 2, 10).ece);
}

TEST_CASE("selective metrics match the hand-evaluated fixture") {
  const std::vector<EvaluatedSample> samples{
      top1_sample(0.9, true, 0), top1_sample(0.5, false, 1), top1_sample(0.3, false, 2)};
  const auto [coverage, acc] = selective_metrics_at(samples, 0.4);
  CHECK_THAT(coverage, Catch::Matchers::WithinAbs(2.0 / 3.0, 1e-15));
  REQUIRE(acc.has_value());
  CHECK(*acc == 0.5);
}

TEST_CASE("selective metrics saturate at the grid ends") {
  const std::vector<EvaluatedSample> samples{
      top1_sample(0.9, true, 0), top1_sample(0.5, false, 1), top1_sample(0.3, true, 2)};
  const auto [cov0, acc0] = selective_metrics_at(samples, 0.0);
  CHECK(cov0 == 1.0);
  CHECK(*acc0 == top1_accuracy(samples));
  const auto [cov1, acc1] = selective_metrics_at(samples, 1.0);
  CHECK(cov1 == 0.0);
  CHECK_FALSE(acc1.has_value());  // empty retained set: undefined, not 0
}

TEST_CASE("threshold sweep is nonincreasing in coverage and validates the grid") {
  std::mt19937_64 gen(9);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<EvaluatedSample> samples;
    const std::size_t n = 1 + gen() % 30;
    for (std::size_t i = 0; i < n; ++i) {
      samples.push_back(top1_sample(static_cast<double>(gen() % 1001) / 1000.0,
                                    gen() % 2 == 0, static_cast<int>(i)));
    }
    const auto curve = threshold_sweep(samples, default_threshold_grid());
    CHECK(curve.points.front().coverage == 1.0);
    for (std::size_t i = 1; i < curve.points.size(); ++i) {
      CHECK(curve.points[i].coverage <= curve.points[i - 1].coverage);
    }
  }
  const std::vector<EvaluatedSample> one{top1_sample(0.5, true, 0)};
  const std::vector<double> bad_order{0.5, 0.2};
  CHECK_THROWS_AS(threshold_sweep(one, bad_order), InvalidArgumentError);
  const std::vector<double> out_of_range{-0.1, 0.5};
  CHECK_THROWS_AS(threshold_sweep(one, out_of_range), InvalidArgumentError);
}

TEST_CASE("step grid on constant-confidence data") {
  const std::vector<EvaluatedSample> samples{top1_sample(0.5, true, 0),
                                             top1_sample(0.5, false, 1)};
  const std::vector<double> grid{0.0, 1.0};
  const auto curve = threshold_sweep(samples, grid);
  CHECK(curve.points[0].coverage == 1.0);
  CHECK(curve.points[1].coverage == 0.0);
}

TEST_CASE("normalized entropy hand values") {
  std::vector<std::pair<std::string, double>> uniform;
  std::vector<std::pair<std::string, double>> onehot;
  std::vector<std::pair<std::string, double>> two_mass;
  for (int i = 0; i < 10; ++i) {
    const std::string label = "w" + std::to_string(i);
    uniform.push_back({label, 0.35});
    onehot.push_back({label, i == 0 ? 1.0 : 0.0});
    two_mass.push_back({label, i < 2 ? 0.5 : 0.0});
  }
  CHECK_THAT(normalized_entropy(prediction(uniform)), Catch::Matchers::WithinAbs(1.0, 1e-12));
  CHECK_THAT(normalized_entropy(prediction(onehot)), Catch::Matchers::WithinAbs(0.0, 1e-12));
  CHECK_THAT(normalized_entropy(prediction(two_mass)),
             Catch::Matchers::WithinAbs(std::log(2.0) / std::log(10.0), 1e-12));
}

TEST_CASE("normalized entropy rejects degenerate inputs") {
  CHECK_THROWS_AS(normalized_entropy(prediction({{"a", 0.0}, {"b", 0.0}})),
                  DegenerateConfidenceError);
  CHECK_THROWS_AS(normalized_entropy(prediction({{"a", 1.0}})), DegenerateConfidenceError);
}

TEST_CASE("normalized entropy is invariant to positive rescaling") {
  std::mt19937_64 gen(21);
  for (int iter = 0; iter < 200; ++iter) {
    std::vector<std::pair<std::string, double>> entries;
    const std::size_t len = 2 + gen() % 8;
    for (std::size_t i = 0; i < len; ++i) {
      entries.push_back({"w" + std::to_string(i),
                         0.001 + static_cast<double>(gen() % 1000) / 1000.0});
    }
    const auto base = prediction(entries);
    const double h = normalized_entropy(base);

    for (double lambda : {0.25, 0.5, 2.0, 1024.0}) {  // powers of two scale exactly
      auto scaled = base;
      for (auto& e : scaled.entries) e.confidence *= lambda;
      CHECK(normalized_entropy(scaled) == h);
    }
    auto scaled = base;
    for (auto& e : scaled.entries) e.confidence *= 0.737;
    CHECK_THAT(normalized_entropy(scaled), Catch::Matchers::WithinAbs(h, 1e-12));
  }
}

TEST_CASE("rankwise stats: identical samples collapse the five-number summary") {
  std::vector<EvaluatedSample> samples;
  for (int i = 0; i < 4; ++i) {
    samples.push_back(sample("a", {{"a", 0.8}, {"b", 0.4}}, "s" + std::to_string(i)));
  }
  const auto report = rankwise_confidence_stats(samples, 2);
  REQUIRE(report.per_rank_stats.size() == 2);
  const auto& rank1 = report.per_rank_stats[0];
  CHECK(rank1.min == 0.8);
  CHECK(rank1.q1 == 0.8);
  CHECK(rank1.median == 0.8);
  CHECK(rank1.q3 == 0.8);
  CHECK(rank1.max == 0.8);
  CHECK(rank1.mean == 0.8);
}

TEST_CASE("rankwise stats: interpolated quantiles over two samples") {
  const std::vector<EvaluatedSample> samples{sample("a", {{"a", 0.2}, {"b", 0.1}}, "s0"),
                                             sample("a", {{"a", 0.8}, {"b", 0.1}}, "s1")};
  const auto report = rankwise_confidence_stats(samples, 2);
  const auto& rank1 = report.per_rank_stats[0];
  CHECK(rank1.min == 0.2);
  CHECK(rank1.max == 0.8);
  CHECK_THAT(rank1.median, Catch::Matchers::WithinAbs(0.5, 1e-15));
}

TEST_CASE("rankwise stats: degenerate samples are excluded from the entropy mean") {
  const std::vector<EvaluatedSample> samples{
      sample("a", {{"a", 0.5}, {"b", 0.5}}, "s0"),          // entropy 1
      sample("a", {{"a", 0.0}, {"b", 0.0}}, "s1"),          // degenerate
  };
  const auto report = rankwise_confidence_stats(samples, 2);
  CHECK(report.entropy_excluded == 1);
  CHECK_THAT(report.mean_normalized_entropy, Catch::Matchers::WithinAbs(1.0, 1e-12));
}

TEST_CASE("metric reductions are exactly invariant to sample order") {
  std::mt19937_64 gen(33);
  std::vector<EvaluatedSample> samples;
  for (int i = 0; i < 200; ++i) {
    std::vector<std::pair<std::string, double>> entries;
    const std::size_t len = 1 + gen() % 6;
    for (std::size_t r = 0; r < len; ++r) {
      entries.push_back({"w" + std::to_string(gen() % 6),
                         static_cast<double>(gen() % 1001) / 1000.0});
    }
    samples.push_back(sample("w" + std::to_string(gen() % 6), entries,
                             "s" + std::to_string(i)));
  }
  auto shuffled = samples;
  std::shuffle(shuffled.begin(), shuffled.end(), gen);

  CHECK(ece_top1(samples, 10).ece == ece_top1(shuffled, 10).ece);
  CHECK(set_ece(samples, 3, 10).ece == set_ece(shuffled, 3, 10).ece);
  CHECK(top1_accuracy(samples) == top1_accuracy(shuffled));
  CHECK(rankwise_confidence_stats(samples, 4).mean_normalized_entropy ==
        rankwise_confidence_stats(shuffled, 4).mean_normalized_entropy);
}
