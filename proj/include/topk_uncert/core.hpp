#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "topk_uncert/errors.hpp"

namespace topk_uncert {

namespace detail {

// Unicode whitespace set used by label canonicalization. Covers ASCII space
// controls plus the common non-ASCII space codepoints.
inline bool is_space_codepoint(char32_t cp) {
  switch (cp) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680:
    case 0x2028: case 0x2029: case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return cp >= 0x2000 && cp <= 0x200A;
  }
}

// Decodes one UTF-8 codepoint at `i`, advancing `i`. Malformed sequences are
// consumed one byte at a time and reported as U+FFFD so canonicalization never
// fails on raw bytes; the byte itself is preserved by the caller.
inline char32_t decode_utf8(std::string_view s, std::size_t& i, std::size_t& len) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  std::size_t n = 0;
  char32_t cp = 0;
  if (b0 < 0x80) {
    n = 1;
    cp = b0;
  } else if ((b0 & 0xE0) == 0xC0) {
    n = 2;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    n = 3;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    n = 4;
    cp = b0 & 0x07;
  } else {
    i += 1;
    len = 1;
    return 0xFFFD;
  }
  if (i + n > s.size()) {
    i += 1;
    len = 1;
    return 0xFFFD;
  }
  for (std::size_t k = 1; k < n; ++k) {
    const auto bk = static_cast<unsigned char>(s[i + k]);
    if ((bk & 0xC0) != 0x80) {
      i += 1;
      len = 1;
      return 0xFFFD;
    }
    cp = (cp << 6) | (bk & 0x3F);
  }
  i += n;
  len = n;
  return cp;
}

}  // namespace detail

// Canonical action string: lowercase, single-space separated tokens with the
// punctuation set . , ; : ! ? stripped from token ends. Two labels are equal
// iff their canonical forms are byte-equal.
class ActionLabel {
 public:
  ActionLabel() = default;

  // Canonicalizes `raw`. Throws EmptyLabelError when nothing survives.
  static ActionLabel canonical(std::string_view raw) {
    std::vector<std::string> tokens;
    std::string current;
    std::size_t i = 0;
    while (i < raw.size()) {
      const std::size_t start = i;
      std::size_t len = 0;
      const char32_t cp = detail::decode_utf8(raw, i, len);
      if (detail::is_space_codepoint(cp)) {
        if (!current.empty()) {
          tokens.push_back(std::move(current));
          current.clear();
        }
        continue;
      }
      for (std::size_t k = 0; k < len; ++k) {
        char c = raw[start + k];
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        current.push_back(c);
      }
    }
    if (!current.empty()) tokens.push_back(std::move(current));

    static constexpr std::string_view kEdgePunct = ".,;:!?";
    std::string out;
    for (auto& tok : tokens) {
      std::size_t lo = 0;
      std::size_t hi = tok.size();
      while (lo < hi && kEdgePunct.find(tok[lo]) != std::string_view::npos) ++lo;
      while (hi > lo && kEdgePunct.find(tok[hi - 1]) != std::string_view::npos) --hi;
      if (lo == hi) continue;
      if (!out.empty()) out.push_back(' ');
      out.append(tok, lo, hi - lo);
    }
    if (out.empty()) throw EmptyLabelError{};
    return ActionLabel(std::move(out));
  }

  const std::string& str() const { return text_; }

  friend bool operator==(const ActionLabel&, const ActionLabel&) = default;
  friend auto operator<=>(const ActionLabel& a, const ActionLabel& b) {
    return a.text_ <=> b.text_;
  }

 private:
  explicit ActionLabel(std::string text) : text_(std::move(text)) {}
  std::string text_;
};

inline ActionLabel canonicalize_label(std::string_view raw) {
  return ActionLabel::canonical(raw);
}

// One ranked hypothesis from one stochastic decode; `verbalized_confidence`
// is the model-reported scalar in [0, 1], absent when the log carried none.
struct PredictionItem {
  ActionLabel action;
  std::optional<double> verbalized_confidence;
};

// One stochastic decode: rank 1 first, no rank gaps.
struct PredictionRun {
  std::vector<PredictionItem> items;
};

// One observed segment with its M stochastic prediction runs.
struct SampleRecord {
  std::string segment_id;
  ActionLabel ground_truth;
  std::vector<PredictionRun> runs;
};

struct Dataset {
  std::vector<SampleRecord> records;
  std::map<std::string, std::string> meta;
};

enum class WarningKind {
  kShortRun,
  kRunCountMismatch,
  kMissingVerbalizedConfidence,
  kTruncatedOutput,
  kDroppedDuplicate,
};

// Diagnostic attached to records or aggregation outputs. Indices are 1-based
// where present.
struct Warning {
  WarningKind kind;
  std::size_t run = 0;
  std::size_t length = 0;
  std::size_t expected = 0;
  std::string text;
};

// Ranked Top-K hypothesis set with per-rank confidences in [0, 1]. Shorter
// than requested only when the evidence could not fill k ranks, in which case
// a warning says so.
struct AggregatedPrediction {
  struct Entry {
    ActionLabel action;
    double confidence = 0.0;
  };
  std::vector<Entry> entries;
  std::vector<Warning> warnings;
};

// Protocol-conformance check. Violations of the expected run count or run
// length and missing verbalized confidences are diagnostics, not errors:
// ragged real-world logs stay analyzable.
inline std::vector<Warning> validate_record(const SampleRecord& r,
                                            std::optional<std::size_t> expected_m = {},
                                            std::optional<std::size_t> expected_k = {}) {
  std::vector<Warning> out;
  if (expected_m && r.runs.size() != *expected_m) {
    out.push_back({WarningKind::kRunCountMismatch, 0, r.runs.size(), *expected_m,
                   "record '" + r.segment_id + "' has " + std::to_string(r.runs.size()) +
                       " runs, expected " + std::to_string(*expected_m)});
  }
  if (expected_k) {
    for (std::size_t i = 0; i < r.runs.size(); ++i) {
      const std::size_t len = r.runs[i].items.size();
      if (len < *expected_k) {
        out.push_back({WarningKind::kShortRun, i + 1, len, *expected_k,
                       "record '" + r.segment_id + "' run " + std::to_string(i + 1) +
                           " has " + std::to_string(len) + " items, expected " +
                           std::to_string(*expected_k)});
      }
    }
  }
  std::size_t missing = 0;
  for (const auto& run : r.runs) {
    for (const auto& item : run.items) {
      if (!item.verbalized_confidence) ++missing;
    }
  }
  if (missing > 0) {
    out.push_back({WarningKind::kMissingVerbalizedConfidence, 0, missing, 0,
                   "record '" + r.segment_id + "': " + std::to_string(missing) +
                       " item(s) without verbalized confidence"});
  }
  return out;
}

}  // namespace topk_uncert

template <>
struct std::hash<topk_uncert::ActionLabel> {
  std::size_t operator()(const topk_uncert::ActionLabel& a) const noexcept {
    return std::hash<std::string>{}(a.str());
  }
};
