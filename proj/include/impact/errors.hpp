#ifndef IMPACT_ERRORS_HPP
#define IMPACT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace impact {

// Error codes double as machine-readable identifiers on the CLI surface.
enum class ErrorCode {
  InvalidArgument,
  InvalidState,
  DegenerateInput,
  NoIntersection,
  ParseError,
  IoError,
  TrainingDiverged,
  SimulationDiverged,
  UndefinedMetric,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:    return "invalid_argument";
    case ErrorCode::InvalidState:       return "invalid_state";
    case ErrorCode::DegenerateInput:    return "degenerate_input";
    case ErrorCode::NoIntersection:     return "no_intersection";
    case ErrorCode::ParseError:         return "parse_error";
    case ErrorCode::IoError:            return "io_error";
    case ErrorCode::TrainingDiverged:   return "training_diverged";
    case ErrorCode::SimulationDiverged: return "simulation_diverged";
    case ErrorCode::UndefinedMetric:    return "undefined_metric";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }
  const char* code_name() const { return error_code_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace impact

#endif  // IMPACT_ERRORS_HPP
