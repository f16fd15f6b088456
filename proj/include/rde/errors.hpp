#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rde {

// Failure categories, ordered by where they surface in a run:
//   Schema      malformed input structure (missing column, bad header)
//   Data        well-formed input with invalid content (bad value, inconsistency)
//   Domain      argument outside a function's documented domain
//   State       operation invoked before its prerequisites hold
//   Numeric     non-finite intermediate or overflow
//   Convergence iteration limit reached without meeting tolerance
//   RankDeficiency  model not identified on the given data
enum class ErrorCategory {
  Schema,
  Data,
  Domain,
  State,
  Numeric,
  Convergence,
  RankDeficiency,
};

inline std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Schema: return "schema";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Domain: return "domain";
    case ErrorCategory::State: return "state";
    case ErrorCategory::Numeric: return "numeric";
    case ErrorCategory::Convergence: return "convergence";
    case ErrorCategory::RankDeficiency: return "rank-deficiency";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }
  const std::string& stage() const noexcept { return stage_; }

  // Records the pipeline stage that was active when the error escaped.
  // Only the first tag sticks; rethrowing wrappers further out are no-ops.
  void tag_stage(std::string_view stage) {
    if (stage_.empty()) stage_ = stage;
  }

 private:
  ErrorCategory category_;
  std::string stage_;
};

struct SchemaError : Error {
  explicit SchemaError(const std::string& m) : Error(ErrorCategory::Schema, m) {}
};

struct DataError : Error {
  explicit DataError(const std::string& m) : Error(ErrorCategory::Data, m) {}
};

struct DomainError : Error {
  explicit DomainError(const std::string& m) : Error(ErrorCategory::Domain, m) {}
};

struct StateError : Error {
  explicit StateError(const std::string& m) : Error(ErrorCategory::State, m) {}
};

struct NumericError : Error {
  explicit NumericError(const std::string& m) : Error(ErrorCategory::Numeric, m) {}
};

struct ConvergenceError : Error {
  explicit ConvergenceError(const std::string& m) : Error(ErrorCategory::Convergence, m) {}
};

struct RankDeficiencyError : Error {
  explicit RankDeficiencyError(const std::string& m) : Error(ErrorCategory::RankDeficiency, m) {}
};

}  // namespace rde
