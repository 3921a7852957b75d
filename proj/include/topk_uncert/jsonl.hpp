#pragma once

#include <istream>
#include <ostream>
#include <string>
#include <unordered_set>
#include <utility>

#include <nlohmann/json.hpp>

#include "topk_uncert/canonical_json.hpp"
#include "topk_uncert/core.hpp"
#include "topk_uncert/errors.hpp"

namespace topk_uncert {

// One record per line:
//   {"segment_id": str, "ground_truth": str,
//    "runs": [[{"action": str, "conf": number?}, ...], ...]}
// "conf" is optional per item. Labels are canonicalized on ingest; line order
// is preserved. Empty lines are skipped.
inline Dataset parse_dataset(std::istream& in, const std::string& source_name = "<stream>") {
  Dataset ds;
  ds.meta["source"] = source_name;
  std::unordered_set<std::string> seen_ids;

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw SchemaError(line_no, "<line>", e.what());
    }
    if (!j.is_object()) throw SchemaError(line_no, "<line>", "record is not a JSON object");

    if (!j.contains("segment_id") || !j["segment_id"].is_string()) {
      throw SchemaError(line_no, "segment_id", "missing or not a string");
    }
    if (!j.contains("ground_truth") || !j["ground_truth"].is_string()) {
      throw SchemaError(line_no, "ground_truth", "missing or not a string");
    }
    if (!j.contains("runs") || !j["runs"].is_array() || j["runs"].empty()) {
      throw SchemaError(line_no, "runs", "missing, not an array, or empty");
    }

    SampleRecord rec;
    rec.segment_id = j["segment_id"].get<std::string>();
    if (!seen_ids.insert(rec.segment_id).second) {
      throw DuplicateSegmentError(rec.segment_id);
    }
    try {
      rec.ground_truth = ActionLabel::canonical(j["ground_truth"].get<std::string>());
    } catch (const EmptyLabelError&) {
      throw SchemaError(line_no, "ground_truth", "empty after canonicalization");
    }

    for (const auto& jrun : j["runs"]) {
      if (!jrun.is_array() || jrun.empty()) {
        throw SchemaError(line_no, "runs", "run is not a non-empty array");
      }
      PredictionRun run;
      run.items.reserve(jrun.size());
      for (const auto& jitem : jrun) {
        if (!jitem.is_object() || !jitem.contains("action") || !jitem["action"].is_string()) {
          throw SchemaError(line_no, "action", "item missing string 'action'");
        }
        PredictionItem item;
        try {
          item.action = ActionLabel::canonical(jitem["action"].get<std::string>());
        } catch (const EmptyLabelError&) {
          throw SchemaError(line_no, "action", "empty after canonicalization");
        }
        if (jitem.contains("conf")) {
          if (!jitem["conf"].is_number()) {
            throw SchemaError(line_no, "conf", "not a number");
          }
          const double c = jitem["conf"].get<double>();
          if (!(c >= 0.0 && c <= 1.0)) throw ConfidenceOutOfRangeError(line_no);
          item.verbalized_confidence = c;
        }
        run.items.push_back(std::move(item));
      }
      rec.runs.push_back(std::move(run));
    }
    ds.records.push_back(std::move(rec));
  }
  ds.meta["record_count"] = std::to_string(ds.records.size());
  return ds;
}

inline std::string serialize_record(const SampleRecord& rec) {
  canonical::Writer w;
  w.begin_object();
  w.key("ground_truth");
  w.value(rec.ground_truth.str());
  w.key("runs");
  w.begin_array();
  for (const auto& run : rec.runs) {
    w.begin_array();
    for (const auto& item : run.items) {
      w.begin_object();
      w.key("action");
      w.value(item.action.str());
      if (item.verbalized_confidence) {
        w.key("conf");
        w.value(*item.verbalized_confidence);
      }
      w.end_object();
    }
    w.end_array();
  }
  w.end_array();
  w.key("segment_id");
  w.value(rec.segment_id);
  w.end_object();
  return w.take();
}

// Canonical JSONL: sorted keys, 17-significant-digit floats, LF endings.
// parse_dataset(serialize_dataset(ds)) reproduces ds record-for-record.
inline void serialize_dataset(const Dataset& ds, std::ostream& out) {
  for (const auto& rec : ds.records) {
    out << serialize_record(rec) << '\n';
  }
}

}  // namespace topk_uncert
