#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "topk_uncert/aggregate.hpp"
#include "topk_uncert/canonical_json.hpp"
#include "topk_uncert/core.hpp"
#include "topk_uncert/metrics.hpp"
#include "topk_uncert/version.hpp"

namespace topk_uncert {

// Uniform threshold grid "start:stop:step". Points are computed as
// start + (stop - start) * i / n so endpoints are exact.
struct GridSpec {
  double start = 0.0;
  double stop = 1.0;
  double step = 0.01;

  std::string descriptor() const {
    return canonical::format_double(start) + ":" + canonical::format_double(stop) + ":" +
           canonical::format_double(step);
  }

  std::vector<double> points() const {
    if (!(step > 0.0)) throw InvalidArgumentError("grid step must be > 0");
    if (!(start >= 0.0 && stop <= 1.0 && start <= stop)) {
      throw InvalidArgumentError("grid must satisfy 0 <= start <= stop <= 1");
    }
    const auto n = static_cast<std::size_t>((stop - start) / step + 0.5);
    std::vector<double> out;
    out.reserve(n + 1);
    if (n == 0) {
      out.push_back(start);
      return out;
    }
    for (std::size_t i = 0; i <= n; ++i) {
      out.push_back(start + (stop - start) * static_cast<double>(i) / static_cast<double>(n));
    }
    return out;
  }

  static GridSpec parse(const std::string& text) {
    GridSpec g;
    if (std::sscanf(text.c_str(), "%lf:%lf:%lf", &g.start, &g.stop, &g.step) != 3) {
      throw InvalidArgumentError("grid spec must be start:stop:step");
    }
    g.points();  // validate
    return g;
  }
};

// Everything needed to reproduce a report bit-exactly from the same input.
struct RunManifest {
  std::string tool_version = kVersion;
  std::string input_path;
  StrategyId strategy = StrategyId::kConsistency;
  std::size_t k = 10;
  std::size_t bins = 10;
  GridSpec grid{};
  BTConfig bt{};
  bool default_confidence = false;
  bool dedup = false;
  std::optional<std::uint64_t> seed;  // present when the input is synthetic
  std::string content_hash;
};

struct EvalOptions {
  StrategyId strategy = StrategyId::kConsistency;
  std::size_t k = 10;
  std::size_t bins = 10;
  GridSpec grid{};
  BTConfig bt{};
  bool default_confidence = false;
  bool dedup = false;
  std::size_t threads = 0;  // 0: hardware concurrency
};

struct EvalReport {
  RunManifest manifest;
  double top1 = 0.0;
  std::vector<std::pair<std::size_t, double>> recall_curve;  // k = 1..K
  CalibrationReport top1_calibration;
  std::vector<std::pair<std::size_t, double>> set_ece_curve;  // k = 1..K
  SelectiveCurve selective;
  GeometryReport geometry;
  std::vector<std::string> warnings;

  double recall_at_k() const { return recall_curve.back().second; }
  double set_ece_at_k() const { return set_ece_curve.back().second; }
};

inline std::string fnv1a64_hex(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "fnv1a64:%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace detail {

// Index-addressed parallel map: output slot i is written by whichever worker
// claims i, so results are independent of the worker count.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  if (threads == 0) threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    workers.emplace_back([&] {
      while (true) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

inline void append_warning_summary(std::vector<std::string>& out, const char* what,
                                   std::size_t count) {
  if (count > 0) out.push_back(std::to_string(count) + " record(s): " + std::string(what));
}

}  // namespace detail

// Worker count: explicit option wins, then TOPK_UNCERT_THREADS, then hardware.
inline std::size_t resolve_thread_count(std::size_t requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("TOPK_UNCERT_THREADS")) {
    const long v = std::atol(env);
    if (v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

// Aggregates every record with the configured strategy (parallel across
// records, deterministic regardless of worker count) and runs the full metric
// suite over the evaluated samples in input order.
inline EvalReport build_eval_report(const Dataset& ds, const EvalOptions& opt,
                                    RunManifest manifest) {
  if (ds.records.empty()) throw EmptyEvaluationError{};

  const std::size_t n = ds.records.size();
  AggregateOptions agg_opt{opt.k, opt.dedup, opt.default_confidence, opt.bt};
  std::vector<AggregatedPrediction> predictions(n);
  detail::parallel_for(n, resolve_thread_count(opt.threads), [&](std::size_t i) {
    predictions[i] = aggregate(ds.records[i], opt.strategy, agg_opt);
  });

  std::vector<EvaluatedSample> samples;
  samples.reserve(n);
  std::size_t truncated = 0;
  std::size_t dropped_dup = 0;
  std::size_t missing_conf = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto& w : predictions[i].warnings) {
      if (w.kind == WarningKind::kTruncatedOutput) ++truncated;
      if (w.kind == WarningKind::kDroppedDuplicate) ++dropped_dup;
    }
    for (const auto& w : validate_record(ds.records[i], std::nullopt, opt.k)) {
      if (w.kind == WarningKind::kMissingVerbalizedConfidence) ++missing_conf;
    }
    samples.push_back(EvaluatedSample::from(ds.records[i].segment_id,
                                            ds.records[i].ground_truth,
                                            std::move(predictions[i])));
  }

  EvalReport report;
  report.manifest = std::move(manifest);
  report.top1 = top1_accuracy(samples);
  report.recall_curve.reserve(opt.k);
  for (std::size_t k = 1; k <= opt.k; ++k) {
    report.recall_curve.emplace_back(k, recall_at_k(samples, k));
  }
  report.top1_calibration = ece_top1(samples, opt.bins);
  report.set_ece_curve = set_ece_curve(samples, opt.k, opt.bins);
  report.selective = threshold_sweep(samples, opt.grid.points());
  report.geometry = rankwise_confidence_stats(samples, opt.k);

  detail::append_warning_summary(report.warnings, "aggregation output shorter than requested k",
                                 truncated);
  detail::append_warning_summary(report.warnings, "duplicate ranks dropped by dedup", dropped_dup);
  detail::append_warning_summary(report.warnings, "items without verbalized confidence",
                                 missing_conf);
  if (report.geometry.entropy_excluded > 0) {
    report.warnings.push_back(std::to_string(report.geometry.entropy_excluded) +
                              " record(s): excluded from mean entropy (degenerate confidence)");
  }
  return report;
}

// --- canonical serialization ---------------------------------------------

inline std::string to_canonical_json(const EvalReport& r) {
  canonical::Writer w;
  w.begin_object();

  w.key("calibration");
  w.begin_object();
  w.key("set_ece_curve");
  w.begin_array();
  for (const auto& [k, v] : r.set_ece_curve) {
    w.begin_object();
    w.key("k");
    w.value(k);
    w.key("set_ece");
    w.value(v);
    w.end_object();
  }
  w.end_array();
  w.key("top1");
  w.begin_object();
  w.key("bins");
  w.begin_array();
  for (const auto& b : r.top1_calibration.bins) {
    w.begin_object();
    w.key("count");
    w.value(b.count);
    w.key("empirical_accuracy");
    w.value(b.empirical_accuracy);
    w.key("hi");
    w.value(b.hi);
    w.key("lo");
    w.value(b.lo);
    w.key("mean_confidence");
    w.value(b.mean_confidence);
    w.end_object();
  }
  w.end_array();
  w.key("ece");
  w.value(r.top1_calibration.ece);
  w.end_object();
  w.end_object();

  w.key("correctness");
  w.begin_object();
  w.key("recall_at_k");
  w.begin_array();
  for (const auto& [k, v] : r.recall_curve) {
    w.begin_object();
    w.key("k");
    w.value(k);
    w.key("recall");
    w.value(v);
    w.end_object();
  }
  w.end_array();
  w.key("top1_accuracy");
  w.value(r.top1);
  w.end_object();

  w.key("geometry");
  w.begin_object();
  w.key("entropy_excluded");
  w.value(r.geometry.entropy_excluded);
  w.key("mean_normalized_entropy");
  w.value(r.geometry.mean_normalized_entropy);
  w.key("per_rank");
  w.begin_array();
  for (const auto& s : r.geometry.per_rank_stats) {
    w.begin_object();
    w.key("count");
    w.value(s.count);
    w.key("max");
    w.value(s.max);
    w.key("mean");
    w.value(s.mean);
    w.key("median");
    w.value(s.median);
    w.key("min");
    w.value(s.min);
    w.key("q1");
    w.value(s.q1);
    w.key("q3");
    w.value(s.q3);
    w.key("rank");
    w.value(s.rank);
    w.end_object();
  }
  w.end_array();
  w.end_object();

  w.key("manifest");
  w.begin_object();
  w.key("bins");
  w.value(r.manifest.bins);
  w.key("bt_epsilon");
  w.value(r.manifest.bt.epsilon);
  w.key("bt_max_iters");
  w.value(r.manifest.bt.max_iters);
  w.key("bt_tol");
  w.value(r.manifest.bt.tol);
  w.key("content_hash");
  w.value(std::string_view(r.manifest.content_hash));
  w.key("dedup");
  w.value(r.manifest.dedup);
  w.key("default_confidence");
  w.value(r.manifest.default_confidence);
  w.key("input_path");
  w.value(std::string_view(r.manifest.input_path));
  w.key("k");
  w.value(r.manifest.k);
  w.key("seed");
  if (r.manifest.seed) {
    w.value(static_cast<std::uint64_t>(*r.manifest.seed));
  } else {
    w.null();
  }
  w.key("strategy");
  w.value(to_string(r.manifest.strategy));
  w.key("threshold_grid");
  w.value(std::string_view(r.manifest.grid.descriptor()));
  w.key("tool_version");
  w.value(std::string_view(r.manifest.tool_version));
  w.end_object();

  w.key("selective");
  w.begin_array();
  for (const auto& p : r.selective.points) {
    w.begin_object();
    w.key("coverage");
    w.value(p.coverage);
    w.key("selective_accuracy");
    if (p.selective_accuracy) {
      w.value(*p.selective_accuracy);
    } else {
      w.null();
    }
    w.key("tau");
    w.value(p.tau);
    w.end_object();
  }
  w.end_array();

  w.key("warnings");
  w.begin_array();
  for (const auto& s : r.warnings) w.value(std::string_view(s));
  w.end_array();

  w.end_object();
  return w.take();
}

inline std::string selective_csv(const EvalReport& r) {
  std::string out = "tau,coverage,selective_accuracy\n";
  for (const auto& p : r.selective.points) {
    out += canonical::format_double(p.tau) + "," + canonical::format_double(p.coverage) + ",";
    if (p.selective_accuracy) out += canonical::format_double(*p.selective_accuracy);
    out += "\n";
  }
  return out;
}

inline std::string set_ece_csv(const EvalReport& r) {
  std::string out = "k,set_ece\n";
  for (const auto& [k, v] : r.set_ece_curve) {
    out += std::to_string(k) + "," + canonical::format_double(v) + "\n";
  }
  return out;
}

inline std::string rankwise_csv(const EvalReport& r) {
  std::string out = "rank,count,min,q1,median,q3,max,mean\n";
  for (const auto& s : r.geometry.per_rank_stats) {
    out += std::to_string(s.rank) + "," + std::to_string(s.count) + "," +
           canonical::format_double(s.min) + "," + canonical::format_double(s.q1) + "," +
           canonical::format_double(s.median) + "," + canonical::format_double(s.q3) + "," +
           canonical::format_double(s.max) + "," + canonical::format_double(s.mean) + "\n";
  }
  return out;
}

}  // namespace topk_uncert
