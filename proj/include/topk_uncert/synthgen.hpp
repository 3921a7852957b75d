#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "topk_uncert/canonical_json.hpp"
#include "topk_uncert/core.hpp"
#include "topk_uncert/errors.hpp"
#include "topk_uncert/numeric.hpp"
#include "topk_uncert/rng.hpp"

namespace topk_uncert {

// Controlled stand-in for a stochastic black-box predictor. Each sample owns a
// latent preference vector; runs are Plackett-Luce draws from it, so every
// oracle quantity (selection probabilities, the true ranking) is known.
struct GeneratorConfig {
  std::size_t vocab_size = 0;
  std::size_t n_samples = 0;
  std::size_t m_runs = 5;
  std::size_t k = 10;
  // Sharpness of the per-sample preference vector: log-weights are
  // concentration * log(Dirichlet(1,...,1) coordinate). Large values spread
  // the weights so far apart that every run repeats the same order.
  double concentration = 1.0;
  // Flattening (>1) or sharpening (<1) applied to preference weights before
  // each run, as weight^(1/T).
  double decode_temperature = 0.8;
  // Additive miscalibration on emitted verbalized confidences, clamped to
  // [0, 1]. Zero keeps them equal to the true per-draw selection probability.
  double confidence_bias = 0.0;
  std::uint64_t seed = 0;
};

inline void validate_config(const GeneratorConfig& cfg) {
  if (cfg.vocab_size < 1) throw InvalidConfigError("vocab_size", "must be >= 1");
  if (cfg.n_samples < 1) throw InvalidConfigError("n_samples", "must be >= 1");
  if (cfg.m_runs < 1) throw InvalidConfigError("m_runs", "must be >= 1");
  if (cfg.k < 1) throw InvalidConfigError("k", "must be >= 1");
  if (cfg.k > cfg.vocab_size) throw InvalidConfigError("k", "must be <= vocab_size");
  if (!(cfg.concentration > 0.0)) throw InvalidConfigError("concentration", "must be > 0");
  if (!(cfg.decode_temperature > 0.0)) {
    throw InvalidConfigError("decode_temperature", "must be > 0");
  }
  if (!std::isfinite(cfg.confidence_bias)) {
    throw InvalidConfigError("confidence_bias", "must be finite");
  }
}

// Deterministic synthetic vocabulary of canonical verb-noun labels.
inline ActionLabel synthetic_action_label(std::size_t index) {
  static constexpr std::array<const char*, 20> kVerbs = {
      "cut",  "take",    "open",  "close", "pour",  "wash",  "mix",   "put",
      "peel", "read",    "move",  "turn",  "push",  "fold",  "squeeze",
      "spread", "crack", "stir",  "slice", "grab"};
  static constexpr std::array<const char*, 20> kNouns = {
      "tomato", "knife", "bottle", "pan",    "cup",    "onion", "bread",
      "plate",  "fridge", "drawer", "jar",   "egg",    "board", "towel",
      "carrot", "pepper", "bowl",   "lid",   "spoon",  "sponge"};
  const std::size_t verb = index % kVerbs.size();
  const std::size_t noun = (index / kVerbs.size() + index) % kNouns.size();
  std::string text = std::string(kVerbs[verb]) + " " + kNouns[noun];
  const std::size_t round = index / (kVerbs.size() * kNouns.size());
  if (round > 0) text += " " + std::to_string(round + 1);
  return ActionLabel::canonical(text);
}

namespace detail {

// Sequential Plackett-Luce draw over log-weights: at each position the next
// action is drawn proportional to the remaining (soft-maxed) mass. Working in
// log space keeps arbitrarily concentrated preference vectors exact. Returns
// drawn indices and the selection probability of each draw at its step.
struct PlDraw {
  std::vector<std::size_t> indices;
  std::vector<double> selection_probs;
};

inline PlDraw plackett_luce_draw(std::span<const double> log_weights, std::size_t k,
                                 std::mt19937_64& gen) {
  const std::size_t n = log_weights.size();
  PlDraw draw;
  draw.indices.reserve(k);
  draw.selection_probs.reserve(k);
  std::vector<std::size_t> remaining(n);
  for (std::size_t i = 0; i < n; ++i) remaining[i] = i;

  std::vector<double> probs;
  for (std::size_t pos = 0; pos < k; ++pos) {
    double max_lw = -std::numeric_limits<double>::infinity();
    for (std::size_t idx : remaining) max_lw = std::max(max_lw, log_weights[idx]);
    probs.clear();
    double total = 0.0;
    for (std::size_t idx : remaining) {
      const double p = std::exp(log_weights[idx] - max_lw);
      probs.push_back(p);
      total += p;
    }
    const double u = rng::uniform01(gen) * total;
    double cum = 0.0;
    std::size_t chosen = remaining.size() - 1;
    for (std::size_t t = 0; t < remaining.size(); ++t) {
      cum += probs[t];
      if (u < cum) {
        chosen = t;
        break;
      }
    }
    draw.indices.push_back(remaining[chosen]);
    draw.selection_probs.push_back(probs[chosen] / total);
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(chosen));
  }
  return draw;
}

}  // namespace detail

// One Plackett-Luce run over positive weights: k actions drawn sequentially
// without replacement, each proportional to the remaining weights. The
// verbalized confidence of each item is its selection probability at draw
// time, shifted by `confidence_bias` and clamped to [0, 1]. Actions are the
// synthetic vocabulary labels for the weight indices.
inline PredictionRun sample_plackett_luce_run(std::span<const double> weights, std::size_t k,
                                              std::mt19937_64& gen,
                                              double confidence_bias = 0.0) {
  if (weights.empty()) throw InvalidWeightsError("weights must be non-empty");
  if (k < 1 || k > weights.size()) {
    throw InvalidWeightsError("k must satisfy 1 <= k <= len(weights)");
  }
  std::vector<double> log_weights(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i])) {
      throw InvalidWeightsError("weights must be finite and positive");
    }
    log_weights[i] = std::log(weights[i]);
  }
  const auto draw = detail::plackett_luce_draw(log_weights, k, gen);
  PredictionRun run;
  run.items.reserve(k);
  for (std::size_t t = 0; t < k; ++t) {
    const double conf = std::clamp(draw.selection_probs[t] + confidence_bias, 0.0, 1.0);
    run.items.push_back({synthetic_action_label(draw.indices[t]), conf});
  }
  return run;
}

// Behavioral seam for a stochastic predictor: same rng stream state, same run.
class StochasticPredictor {
 public:
  virtual ~StochasticPredictor() = default;
  virtual PredictionRun sample_run(std::mt19937_64& gen) const = 0;
};

class PlackettLucePredictor final : public StochasticPredictor {
 public:
  PlackettLucePredictor(std::vector<double> log_weights, std::size_t k, double confidence_bias)
      : log_weights_(std::move(log_weights)), k_(k), confidence_bias_(confidence_bias) {}

  PredictionRun sample_run(std::mt19937_64& gen) const override {
    const auto draw = detail::plackett_luce_draw(log_weights_, k_, gen);
    PredictionRun run;
    run.items.reserve(k_);
    for (std::size_t t = 0; t < k_; ++t) {
      const double conf =
          std::clamp(draw.selection_probs[t] + confidence_bias_, 0.0, 1.0);
      run.items.push_back({synthetic_action_label(draw.indices[t]), conf});
    }
    return run;
  }

 private:
  std::vector<double> log_weights_;
  std::size_t k_;
  double confidence_bias_;
};

// Oracle view of one synthetic sample: the effective (temperature-adjusted)
// log-preference vector the runs are drawn from, and the ground-truth index.
struct SyntheticSampleTruth {
  std::vector<double> log_weights;
  std::size_t truth_index = 0;

  // Vocabulary indices by descending preference; ties broken by index.
  std::vector<std::size_t> preference_order() const {
    std::vector<std::size_t> order(log_weights.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return log_weights[a] > log_weights[b];
    });
    return order;
  }
};

namespace detail {

// Shared derivation of sample j: preference vector, ground truth, runs.
//
// The ground truth is drawn from the same effective distribution each run's
// rank-1 item is drawn from. That makes the emitted rank-1 confidence equal
// the probability the item is correct, giving calibration tests an exact
// reference when confidence_bias is zero.
inline std::pair<SyntheticSampleTruth, SampleRecord> draw_sample(const GeneratorConfig& cfg,
                                                                 std::size_t index) {
  auto gen = rng::derive_stream(cfg.seed, index);

  SyntheticSampleTruth truth;
  truth.log_weights.resize(cfg.vocab_size);
  for (std::size_t i = 0; i < cfg.vocab_size; ++i) {
    // Dirichlet(1,...,1) coordinate via Exp(1); the normalization shift is
    // constant across i and drops out of every softmax.
    double e = -std::log1p(-rng::uniform01(gen));
    if (e < 1e-300) e = 1e-300;
    truth.log_weights[i] = cfg.concentration * std::log(e) / cfg.decode_temperature;
  }

  // Ground truth ~ softmax(log_weights), drawn by CDF inversion.
  {
    const double lse = numeric::log_sum_exp(truth.log_weights);
    const double u = rng::uniform01(gen);
    double cum = 0.0;
    truth.truth_index = cfg.vocab_size - 1;
    for (std::size_t i = 0; i < cfg.vocab_size; ++i) {
      cum += std::exp(truth.log_weights[i] - lse);
      if (u < cum) {
        truth.truth_index = i;
        break;
      }
    }
  }

  SampleRecord rec;
  {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "seg_%06zu", index);
    rec.segment_id = buf;
  }
  rec.ground_truth = synthetic_action_label(truth.truth_index);
  const PlackettLucePredictor predictor(truth.log_weights, cfg.k, cfg.confidence_bias);
  rec.runs.reserve(cfg.m_runs);
  for (std::size_t run = 0; run < cfg.m_runs; ++run) {
    rec.runs.push_back(predictor.sample_run(gen));
  }
  return {std::move(truth), std::move(rec)};
}

}  // namespace detail

// Oracle access for tests: recomputes the latent state of sample `index`.
inline SyntheticSampleTruth synthetic_sample_truth(const GeneratorConfig& cfg,
                                                   std::size_t index) {
  validate_config(cfg);
  return detail::draw_sample(cfg, index).first;
}

// Fully seed-determined dataset of n_samples records with m_runs Plackett-Luce
// runs each.
inline Dataset generate_dataset(const GeneratorConfig& cfg) {
  validate_config(cfg);
  Dataset ds;
  ds.records.reserve(cfg.n_samples);
  for (std::size_t j = 0; j < cfg.n_samples; ++j) {
    ds.records.push_back(detail::draw_sample(cfg, j).second);
  }
  ds.meta["source"] = "synthetic";
  ds.meta["generator"] = "plackett_luce";
  ds.meta["vocab_size"] = std::to_string(cfg.vocab_size);
  ds.meta["n_samples"] = std::to_string(cfg.n_samples);
  ds.meta["m_runs"] = std::to_string(cfg.m_runs);
  ds.meta["k"] = std::to_string(cfg.k);
  ds.meta["concentration"] = canonical::format_double(cfg.concentration);
  ds.meta["decode_temperature"] = canonical::format_double(cfg.decode_temperature);
  ds.meta["confidence_bias"] = canonical::format_double(cfg.confidence_bias);
  ds.meta["seed"] = std::to_string(cfg.seed);
  ds.meta["record_count"] = std::to_string(ds.records.size());
  return ds;
}

}  // namespace topk_uncert
