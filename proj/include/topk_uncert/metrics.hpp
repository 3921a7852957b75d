#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "topk_uncert/core.hpp"
#include "topk_uncert/errors.hpp"
#include "topk_uncert/numeric.hpp"

namespace topk_uncert {

// One record after aggregation, with everything the metric suite needs:
// execution-policy fields (highest-ranked hypothesis) and set correctness.
class EvaluatedSample {
 public:
  static constexpr std::size_t kNoHit = std::numeric_limits<std::size_t>::max();

  static EvaluatedSample from(std::string segment_id, ActionLabel ground_truth,
                              AggregatedPrediction prediction) {
    if (prediction.entries.empty()) throw EmptyPredictionError{};
    EvaluatedSample s;
    s.segment_id_ = std::move(segment_id);
    s.ground_truth_ = std::move(ground_truth);
    s.first_hit_rank_ = kNoHit;
    for (std::size_t i = 0; i < prediction.entries.size(); ++i) {
      if (prediction.entries[i].action == s.ground_truth_) {
        s.first_hit_rank_ = i;
        break;
      }
    }
    s.exec_confidence_ = prediction.entries.front().confidence;
    s.exec_correct_ = s.first_hit_rank_ == 0;
    s.prediction_ = std::move(prediction);
    return s;
  }

  const std::string& segment_id() const { return segment_id_; }
  const ActionLabel& ground_truth() const { return ground_truth_; }
  const AggregatedPrediction& prediction() const { return prediction_; }

  // Membership of the ground truth in the unique actions of the first k
  // entries; monotone nondecreasing in k by construction.
  bool set_correct_at(std::size_t k) const {
    return first_hit_rank_ != kNoHit && first_hit_rank_ < k;
  }

  double exec_confidence() const { return exec_confidence_; }
  bool exec_correct() const { return exec_correct_; }

  // Mean confidence over the first min(k, length) entries.
  double set_confidence_at(std::size_t k) const {
    const std::size_t take = std::min(k, prediction_.entries.size());
    std::vector<double> confs(take);
    for (std::size_t i = 0; i < take; ++i) confs[i] = prediction_.entries[i].confidence;
    return numeric::sorted_sum(std::move(confs)) / static_cast<double>(take);
  }

 private:
  std::string segment_id_;
  ActionLabel ground_truth_;
  AggregatedPrediction prediction_;
  std::size_t first_hit_rank_ = kNoHit;
  double exec_confidence_ = 0.0;
  bool exec_correct_ = false;
};

struct CalibrationBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
  double mean_confidence = 0.0;   // 0 when the bin is empty
  double empirical_accuracy = 0.0;
};

struct CalibrationReport {
  std::vector<CalibrationBin> bins;
  double ece = 0.0;
};

struct SelectivePoint {
  double tau = 0.0;
  double coverage = 0.0;
  std::optional<double> selective_accuracy;  // empty iff nothing retained
};

struct SelectiveCurve {
  std::vector<SelectivePoint> points;
};

struct RankConfidenceStats {
  std::size_t rank = 0;  // 1-based
  std::size_t count = 0;
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0, mean = 0.0;
};

struct GeometryReport {
  std::vector<RankConfidenceStats> per_rank_stats;
  double mean_normalized_entropy = 0.0;
  std::size_t entropy_excluded = 0;  // samples skipped as degenerate
};

namespace detail {

// Equal-width bin index over [0, 1]: [lo, hi) everywhere except the last bin,
// which is right-closed. A confidence exactly on an interior boundary belongs
// to the upper bin. The correction loops pin that rule to the representable
// boundaries i/B regardless of how conf * B rounded.
inline std::size_t bin_index(double conf, std::size_t bins) {
  const auto b = static_cast<double>(bins);
  auto idx = static_cast<std::size_t>(std::floor(conf * b));
  if (idx >= bins) idx = bins - 1;
  while (idx + 1 < bins && conf >= static_cast<double>(idx + 1) / b) ++idx;
  while (idx > 0 && conf < static_cast<double>(idx) / b) --idx;
  return idx;
}

// Binned |accuracy - confidence| gap weighted by occupancy. Per-bin confidence
// masses are summed in sorted order, so the result is exactly invariant to
// sample order.
inline CalibrationReport binned_ece(const std::vector<std::pair<double, bool>>& obs,
                                    std::size_t bins) {
  CalibrationReport report;
  report.bins.resize(bins);
  std::vector<std::vector<double>> confs(bins);
  std::vector<std::size_t> correct(bins, 0);
  for (const auto& [conf, ok] : obs) {
    const std::size_t b = bin_index(conf, bins);
    confs[b].push_back(conf);
    if (ok) ++correct[b];
  }
  const auto n = static_cast<double>(obs.size());
  std::vector<double> terms(bins, 0.0);
  for (std::size_t b = 0; b < bins; ++b) {
    auto& bin = report.bins[b];
    bin.lo = static_cast<double>(b) / static_cast<double>(bins);
    bin.hi = b + 1 == bins ? 1.0 : static_cast<double>(b + 1) / static_cast<double>(bins);
    bin.count = confs[b].size();
    if (bin.count == 0) continue;
    bin.mean_confidence =
        numeric::sorted_sum(std::move(confs[b])) / static_cast<double>(bin.count);
    bin.empirical_accuracy =
        static_cast<double>(correct[b]) / static_cast<double>(bin.count);
    terms[b] = static_cast<double>(bin.count) / n *
               std::abs(bin.empirical_accuracy - bin.mean_confidence);
  }
  report.ece = numeric::compensated_sum(terms);
  return report;
}

inline void require_non_empty(std::span<const EvaluatedSample> samples) {
  if (samples.empty()) throw EmptyEvaluationError{};
}

inline void require_bins(std::size_t bins) {
  if (bins < 1) throw InvalidArgumentError("bins must be >= 1");
}

// Entropy of the rescaled confidence prefix, normalized by log(size).
// Returns nothing for the degenerate cases (size < 2 or zero mass).
inline std::optional<double> normalized_entropy_of(std::span<const double> confs) {
  if (confs.size() < 2) return std::nullopt;
  std::vector<double> mass(confs.begin(), confs.end());
  const double total = numeric::sorted_sum(mass);
  if (!(total > 0.0)) return std::nullopt;
  std::vector<double> terms;
  terms.reserve(confs.size());
  for (double c : confs) {
    const double p = c / total;
    terms.push_back(p > 0.0 ? -p * std::log(p) : 0.0);
  }
  const double h = numeric::sorted_sum(std::move(terms));
  return h / std::log(static_cast<double>(confs.size()));
}

}  // namespace detail

inline double top1_accuracy(std::span<const EvaluatedSample> samples) {
  detail::require_non_empty(samples);
  std::size_t hits = 0;
  for (const auto& s : samples) {
    if (s.exec_correct()) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

inline double recall_at_k(std::span<const EvaluatedSample> samples, std::size_t k) {
  detail::require_non_empty(samples);
  if (k < 1) throw InvalidKError{};
  std::size_t hits = 0;
  for (const auto& s : samples) {
    if (s.set_correct_at(k)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

// Classical single-hypothesis calibration: confidence of the top-ranked action
// against its empirical correctness.
inline CalibrationReport ece_top1(std::span<const EvaluatedSample> samples, std::size_t bins) {
  detail::require_non_empty(samples);
  detail::require_bins(bins);
  std::vector<std::pair<double, bool>> obs;
  obs.reserve(samples.size());
  for (const auto& s : samples) obs.emplace_back(s.exec_confidence(), s.exec_correct());
  return detail::binned_ece(obs, bins);
}

// Set-level calibration: the event is ground-truth membership in the Top-K
// set, the confidence is the mean over the set.
inline CalibrationReport set_ece(std::span<const EvaluatedSample> samples, std::size_t k,
                                 std::size_t bins) {
  detail::require_non_empty(samples);
  if (k < 1) throw InvalidKError{};
  detail::require_bins(bins);
  std::vector<std::pair<double, bool>> obs;
  obs.reserve(samples.size());
  for (const auto& s : samples) obs.emplace_back(s.set_confidence_at(k), s.set_correct_at(k));
  return detail::binned_ece(obs, bins);
}

inline std::vector<std::pair<std::size_t, double>> set_ece_curve(
    std::span<const EvaluatedSample> samples, std::size_t k_max, std::size_t bins) {
  if (k_max < 1) throw InvalidKError{};
  std::vector<std::pair<std::size_t, double>> curve;
  curve.reserve(k_max);
  for (std::size_t k = 1; k <= k_max; ++k) {
    curve.emplace_back(k, set_ece(samples, k, bins).ece);
  }
  return curve;
}

// Confidence-gated execution at threshold tau: fraction retained and accuracy
// over the retained subset (undefined when nothing is retained).
inline std::pair<double, std::optional<double>> selective_metrics_at(
    std::span<const EvaluatedSample> samples, double tau) {
  detail::require_non_empty(samples);
  if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidArgumentError("tau must lie in [0, 1]");
  std::size_t retained = 0;
  std::size_t correct = 0;
  for (const auto& s : samples) {
    if (s.exec_confidence() >= tau) {
      ++retained;
      if (s.exec_correct()) ++correct;
    }
  }
  const double coverage = static_cast<double>(retained) / static_cast<double>(samples.size());
  if (retained == 0) return {coverage, std::nullopt};
  return {coverage, static_cast<double>(correct) / static_cast<double>(retained)};
}

inline SelectiveCurve threshold_sweep(std::span<const EvaluatedSample> samples,
                                      std::span<const double> grid) {
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!(grid[i] >= 0.0 && grid[i] <= 1.0)) {
      throw InvalidArgumentError("threshold grid values must lie in [0, 1]");
    }
    if (i > 0 && grid[i] < grid[i - 1]) {
      throw InvalidArgumentError("threshold grid must be sorted ascending");
    }
  }
  SelectiveCurve curve;
  curve.points.reserve(grid.size());
  for (double tau : grid) {
    const auto [coverage, acc] = selective_metrics_at(samples, tau);
    curve.points.push_back({tau, coverage, acc});
  }
  return curve;
}

// tau in {0.00, 0.01, ..., 1.00}.
inline std::vector<double> default_threshold_grid() {
  std::vector<double> grid(101);
  for (std::size_t i = 0; i <= 100; ++i) grid[i] = static_cast<double>(i) / 100.0;
  return grid;
}

// Dispersion of confidence within the prediction: Shannon entropy of the
// rescaled confidences divided by log K. Degenerate inputs (single entry or
// zero total mass) have no defined value.
inline double normalized_entropy(const AggregatedPrediction& p) {
  std::vector<double> confs;
  confs.reserve(p.entries.size());
  for (const auto& e : p.entries) confs.push_back(e.confidence);
  const auto h = detail::normalized_entropy_of(confs);
  if (!h) {
    throw DegenerateConfidenceError(
        p.entries.size() < 2 ? "entropy undefined for a single-entry prediction"
                             : "entropy undefined for all-zero confidence mass");
  }
  return *h;
}

// Five-number summary + mean of confidence at each rank, and the mean
// normalized entropy over the Top-k prefix of each sample. Samples whose
// prefix is degenerate are excluded from the entropy mean and counted.
inline GeometryReport rankwise_confidence_stats(std::span<const EvaluatedSample> samples,
                                                std::size_t k) {
  detail::require_non_empty(samples);
  if (k < 1) throw InvalidKError{};

  GeometryReport report;
  report.per_rank_stats.resize(k);
  for (std::size_t rank = 0; rank < k; ++rank) {
    std::vector<double> confs;
    for (const auto& s : samples) {
      const auto& entries = s.prediction().entries;
      if (rank < entries.size()) confs.push_back(entries[rank].confidence);
    }
    auto& stats = report.per_rank_stats[rank];
    stats.rank = rank + 1;
    stats.count = confs.size();
    if (confs.empty()) continue;
    std::sort(confs.begin(), confs.end());
    stats.min = confs.front();
    stats.max = confs.back();
    stats.q1 = numeric::quantile_sorted(confs, 0.25);
    stats.median = numeric::quantile_sorted(confs, 0.50);
    stats.q3 = numeric::quantile_sorted(confs, 0.75);
    stats.mean = numeric::compensated_sum(confs) / static_cast<double>(confs.size());
  }

  std::vector<double> entropies;
  entropies.reserve(samples.size());
  for (const auto& s : samples) {
    const auto& entries = s.prediction().entries;
    const std::size_t take = std::min(k, entries.size());
    std::vector<double> confs(take);
    for (std::size_t i = 0; i < take; ++i) confs[i] = entries[i].confidence;
    if (const auto h = detail::normalized_entropy_of(confs)) {
      entropies.push_back(*h);
    } else {
      ++report.entropy_excluded;
    }
  }
  if (!entropies.empty()) {
    const auto n = static_cast<double>(entropies.size());
    report.mean_normalized_entropy = numeric::sorted_sum(std::move(entropies)) / n;
  }
  return report;
}

}  // namespace topk_uncert
