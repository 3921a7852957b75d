#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "topk_uncert/btrank.hpp"
#include "topk_uncert/core.hpp"
#include "topk_uncert/errors.hpp"
#include "topk_uncert/numeric.hpp"

namespace topk_uncert {

enum class StrategyId { kConsistency, kConfidenceWeighted, kPairRank, kSingleRun };

inline std::string_view to_string(StrategyId s) {
  switch (s) {
    case StrategyId::kConsistency: return "consistency";
    case StrategyId::kConfidenceWeighted: return "weighted";
    case StrategyId::kPairRank: return "pairrank";
    case StrategyId::kSingleRun: return "single";
  }
  return "unknown";
}

inline std::optional<StrategyId> strategy_from_string(std::string_view name) {
  if (name == "consistency") return StrategyId::kConsistency;
  if (name == "weighted") return StrategyId::kConfidenceWeighted;
  if (name == "pairrank") return StrategyId::kPairRank;
  if (name == "single") return StrategyId::kSingleRun;
  return std::nullopt;
}

// One within-run ordering event, accumulated across runs.
struct PairwisePreference {
  ActionLabel winner;
  ActionLabel loser;
  std::uint64_t count = 0;
};

struct AggregateOptions {
  std::size_t k = 10;
  bool dedup = false;
  bool default_confidence = false;
  BTConfig bt{};
};

namespace detail {

// Per-position vote tally for the rank-wise strategies. Vote weights and
// tie-break supports are summed in sorted order so the result is exactly
// invariant to run permutation.
struct PositionTally {
  struct Contribs {
    std::size_t votes = 0;
    std::vector<double> weights;        // voting weight per contributing run
    std::vector<double> support;        // verbalized confidence, 0 when absent
  };
  std::map<ActionLabel, Contribs> by_action;
  std::vector<double> all_weights;      // every weight cast at this position
};

struct Candidate {
  const ActionLabel* action;
  double score;
  double support;
};

// Picks argmax by (score, support, lexicographically-smaller label). Callers
// iterate candidates in ascending label order and use strict improvement, so
// the first of a tie wins.
inline const Candidate* pick_winner(const std::vector<Candidate>& cands,
                                    const std::set<ActionLabel>* used) {
  const Candidate* best = nullptr;
  for (const auto& c : cands) {
    if (used && used->count(*c.action)) continue;
    if (!best || c.score > best->score ||
        (c.score == best->score && c.support > best->support)) {
      best = &c;
    }
  }
  return best;
}

inline void add_truncation_warning(AggregatedPrediction& out, std::size_t produced,
                                   std::size_t requested, const std::string& why) {
  out.warnings.push_back({WarningKind::kTruncatedOutput, 0, produced, requested,
                          "output has " + std::to_string(produced) + " of " +
                              std::to_string(requested) + " requested ranks: " + why});
}

// Shared core of the consistency and confidence-weighted strategies; they
// differ only in the voting weight and in the confidence denominator.
inline AggregatedPrediction aggregate_positionwise(const SampleRecord& r, std::size_t k,
                                                   bool weighted, bool default_confidence,
                                                   bool dedup) {
  if (k < 1) throw InvalidKError{};
  const std::size_t m = r.runs.size();
  if (m == 0) throw InvalidArgumentError("record '" + r.segment_id + "' has no runs");

  AggregatedPrediction out;
  std::set<ActionLabel> used;
  for (std::size_t pos = 0; pos < k; ++pos) {
    PositionTally tally;
    for (std::size_t run_idx = 0; run_idx < m; ++run_idx) {
      const auto& items = r.runs[run_idx].items;
      if (pos >= items.size()) continue;  // short run: abstention, no vote
      const auto& item = items[pos];
      double weight = 1.0;
      if (weighted) {
        if (item.verbalized_confidence) {
          weight = *item.verbalized_confidence;
        } else if (default_confidence) {
          weight = 1.0;
        } else {
          throw MissingConfidenceError(run_idx + 1, pos + 1);
        }
      }
      auto& contribs = tally.by_action[item.action];
      contribs.votes += 1;
      contribs.weights.push_back(weight);
      contribs.support.push_back(item.verbalized_confidence.value_or(0.0));
      tally.all_weights.push_back(weight);
    }
    if (tally.by_action.empty()) {
      // No run reaches this rank; deeper ranks cannot either.
      add_truncation_warning(out, out.entries.size(), k, "no run covers deeper ranks");
      return out;
    }

    std::vector<Candidate> cands;
    cands.reserve(tally.by_action.size());
    for (auto& [action, contribs] : tally.by_action) {
      const double score = weighted ? numeric::sorted_sum(std::move(contribs.weights))
                                    : static_cast<double>(contribs.votes);
      cands.push_back({&action, score, numeric::sorted_sum(std::move(contribs.support))});
    }
    const Candidate* winner = pick_winner(cands, dedup ? &used : nullptr);
    if (!winner) {
      // Every voted action already elected at a better rank.
      out.warnings.push_back({WarningKind::kDroppedDuplicate, 0, out.entries.size(), k,
                              "rank " + std::to_string(pos + 1) +
                                  " dropped: all candidates already placed"});
      continue;
    }

    double confidence;
    if (weighted) {
      const double total = numeric::sorted_sum(std::move(tally.all_weights));
      confidence = total > 0.0 ? winner->score / total : 0.0;
    } else {
      confidence = winner->score / static_cast<double>(m);
    }
    out.entries.push_back({*winner->action, confidence});
    if (dedup) used.insert(*winner->action);
  }
  return out;
}

}  // namespace detail

// Position-wise majority vote; the confidence at each rank is the agreement
// frequency over all M runs, so abstentions from short runs read as
// uncertainty.
inline AggregatedPrediction aggregate_consistency(const SampleRecord& r, std::size_t k,
                                                  bool dedup = false) {
  return detail::aggregate_positionwise(r, k, /*weighted=*/false,
                                        /*default_confidence=*/false, dedup);
}

// Position-wise vote weighted by verbalized confidence; the confidence at each
// rank is the winner's share of all confidence mass cast at that rank. With
// default_confidence, items lacking a confidence vote with weight 1, which
// reduces the vote to the consistency rule.
inline AggregatedPrediction aggregate_confidence_weighted(const SampleRecord& r, std::size_t k,
                                                          bool default_confidence = false,
                                                          bool dedup = false) {
  return detail::aggregate_positionwise(r, k, /*weighted=*/true, default_confidence, dedup);
}

// Every within-run ordered pair (i ranked above j) becomes one preference
// event; duplicate actions inside a run never generate self-pairs. Counts are
// accumulated across runs and returned sorted by (winner, loser).
inline std::vector<PairwisePreference> extract_pairwise_preferences(const SampleRecord& r) {
  std::map<std::pair<ActionLabel, ActionLabel>, std::uint64_t> counts;
  for (const auto& run : r.runs) {
    const auto& items = run.items;
    for (std::size_t i = 0; i < items.size(); ++i) {
      for (std::size_t j = i + 1; j < items.size(); ++j) {
        if (items[i].action == items[j].action) continue;
        ++counts[{items[i].action, items[j].action}];
      }
    }
  }
  std::vector<PairwisePreference> out;
  out.reserve(counts.size());
  for (const auto& [pair, count] : counts) {
    out.push_back({pair.first, pair.second, count});
  }
  return out;
}

// Unique-action set and win matrix for one record, indexed in lexicographic
// label order.
inline PreferenceCounts build_preference_counts(const SampleRecord& r) {
  std::set<ActionLabel> unique;
  for (const auto& run : r.runs) {
    for (const auto& item : run.items) unique.insert(item.action);
  }
  PreferenceCounts counts;
  counts.actions.assign(unique.begin(), unique.end());
  const std::size_t n = counts.actions.size();
  counts.wins.assign(n, std::vector<std::uint64_t>(n, 0));
  std::map<ActionLabel, std::size_t> index;
  for (std::size_t i = 0; i < n; ++i) index[counts.actions[i]] = i;
  for (const auto& pref : extract_pairwise_preferences(r)) {
    counts.wins[index[pref.winner]][index[pref.loser]] += pref.count;
  }
  return counts;
}

// Global ranking strategy: fits Bradley-Terry utilities on the record's
// pairwise preference events and emits actions by descending utility with
// softmax-normalized confidences. When fewer unique actions exist than k, the
// output is shortened rather than padded with invented hypotheses.
inline AggregatedPrediction aggregate_pairrank(const SampleRecord& r, std::size_t k,
                                               const BTConfig& cfg = {}) {
  if (k < 1) throw InvalidKError{};
  if (r.runs.empty()) throw InvalidArgumentError("record '" + r.segment_id + "' has no runs");

  const PreferenceCounts counts = build_preference_counts(r);
  const BTScores scores = fit_bradley_terry(counts, cfg);

  // Tie-break on equal utility: total verbalized support, then label.
  const std::size_t n = counts.actions.size();
  std::vector<double> support(n, 0.0);
  {
    std::map<ActionLabel, std::vector<double>> per_action;
    for (const auto& run : r.runs) {
      for (const auto& item : run.items) {
        per_action[item.action].push_back(item.verbalized_confidence.value_or(0.0));
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      support[i] = numeric::sorted_sum(std::move(per_action[counts.actions[i]]));
    }
  }
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores.s[a] != scores.s[b]) return scores.s[a] > scores.s[b];
    if (support[a] != support[b]) return support[a] > support[b];
    return counts.actions[a] < counts.actions[b];
  });

  AggregatedPrediction out;
  const std::size_t take = std::min(k, n);
  out.entries.reserve(take);
  for (std::size_t t = 0; t < take; ++t) {
    out.entries.push_back({counts.actions[order[t]], scores.p_hat[order[t]]});
  }
  if (n < k) {
    detail::add_truncation_warning(out, n, k, "only " + std::to_string(n) +
                                                  " unique actions across runs");
  }
  return out;
}

// The no-aggregation baseline: the first run verbatim, substituting 1.0 where
// a verbalized confidence is absent.
inline AggregatedPrediction aggregate_single_run(const SampleRecord& r, std::size_t k,
                                                 bool dedup = false) {
  if (k < 1) throw InvalidKError{};
  if (r.runs.empty()) throw InvalidArgumentError("record '" + r.segment_id + "' has no runs");

  AggregatedPrediction out;
  const auto& items = r.runs.front().items;
  std::set<ActionLabel> used;
  std::size_t dropped = 0;
  for (const auto& item : items) {
    if (out.entries.size() >= k) break;
    if (dedup && !used.insert(item.action).second) {
      ++dropped;
      continue;
    }
    out.entries.push_back({item.action, item.verbalized_confidence.value_or(1.0)});
  }
  if (dropped > 0) {
    out.warnings.push_back({WarningKind::kDroppedDuplicate, 1, dropped, k,
                            std::to_string(dropped) + " duplicate action(s) removed"});
  }
  if (out.entries.size() < k) {
    detail::add_truncation_warning(out, out.entries.size(), k, "first run is shorter than k");
  }
  return out;
}

inline AggregatedPrediction aggregate(const SampleRecord& r, StrategyId strategy,
                                      const AggregateOptions& opt = {}) {
  switch (strategy) {
    case StrategyId::kConsistency:
      return aggregate_consistency(r, opt.k, opt.dedup);
    case StrategyId::kConfidenceWeighted:
      return aggregate_confidence_weighted(r, opt.k, opt.default_confidence, opt.dedup);
    case StrategyId::kPairRank:
      return aggregate_pairrank(r, opt.k, opt.bt);
    case StrategyId::kSingleRun:
      return aggregate_single_run(r, opt.k, opt.dedup);
  }
  throw InvalidArgumentError("unknown strategy");
}

}  // namespace topk_uncert
