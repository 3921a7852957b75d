#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace topk_uncert {

// Base class for every error this library raises on purpose. Structural
// problems (bad schema, out-of-range values, degenerate inputs) throw; protocol
// deviations that leave the data analyzable are reported as Warnings instead.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A label canonicalized to the empty string.
struct EmptyLabelError final : Error {
  EmptyLabelError() : Error("label is empty after canonicalization") {}
};

// Missing or ill-typed field in a JSONL record.
struct SchemaError final : Error {
  SchemaError(std::size_t line_no, std::string field_name, const std::string& what)
      : Error("line " + std::to_string(line_no) + ", field '" + field_name + "': " + what),
        line_no(line_no),
        field(std::move(field_name)) {}
  std::size_t line_no;
  std::string field;
};

struct DuplicateSegmentError final : Error {
  explicit DuplicateSegmentError(std::string id)
      : Error("duplicate segment_id '" + id + "'"), segment_id(std::move(id)) {}
  std::string segment_id;
};

struct ConfidenceOutOfRangeError final : Error {
  explicit ConfidenceOutOfRangeError(std::size_t line_no)
      : Error("line " + std::to_string(line_no) + ": confidence outside [0, 1]"),
        line_no(line_no) {}
  std::size_t line_no;
};

struct InvalidKError final : Error {
  explicit InvalidKError(const std::string& what = "k must be >= 1") : Error(what) {}
};

// Precondition violations that have no dedicated error type (bad bin count,
// unsorted threshold grid, tau outside [0, 1], ...).
struct InvalidArgumentError final : Error {
  using Error::Error;
};

// Confidence-weighted aggregation hit an item without a verbalized confidence
// while default-confidence mode was off. Indices are 1-based.
struct MissingConfidenceError final : Error {
  MissingConfidenceError(std::size_t run, std::size_t rank)
      : Error("run " + std::to_string(run) + ", rank " + std::to_string(rank) +
              ": item carries no verbalized confidence"),
        run(run),
        rank(rank) {}
  std::size_t run;
  std::size_t rank;
};

// Bradley-Terry MLE is unbounded or non-unique without pseudo-counts.
struct DegenerateGraphError final : Error {
  using Error::Error;
};

struct EmptyEvaluationError final : Error {
  EmptyEvaluationError() : Error("evaluation over an empty sample list") {}
};

// Normalized entropy is undefined: all-zero confidence mass or a single entry.
struct DegenerateConfidenceError final : Error {
  using Error::Error;
};

struct EmptyPredictionError final : Error {
  EmptyPredictionError() : Error("aggregated prediction has no entries") {}
};

struct InvalidWeightsError final : Error {
  using Error::Error;
};

// Generator configuration rejected; `field` names the offending knob.
struct InvalidConfigError final : Error {
  InvalidConfigError(std::string field_name, const std::string& what)
      : Error("config field '" + field_name + "': " + what), field(std::move(field_name)) {}
  std::string field;
};

struct IoError final : Error {
  using Error::Error;
};

}  // namespace topk_uncert
