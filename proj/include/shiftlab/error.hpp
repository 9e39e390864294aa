#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shiftlab {

// Failure categories. The CLI prints the category name as the first token of
// its single-line error message, so these names are part of the interface.
enum class ErrorKind {
  configuration,
  unsupported_rate,
  empty_set,
  missing_baseline,
  degenerate,
  dimension_mismatch,
  missing_stats,
  insufficient_rows,
  io,
  parse,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::configuration: return "configuration";
    case ErrorKind::unsupported_rate: return "unsupported_rate";
    case ErrorKind::empty_set: return "empty_set";
    case ErrorKind::missing_baseline: return "missing_baseline";
    case ErrorKind::degenerate: return "degenerate";
    case ErrorKind::dimension_mismatch: return "dimension_mismatch";
    case ErrorKind::missing_stats: return "missing_stats";
    case ErrorKind::insufficient_rows: return "insufficient_rows";
    case ErrorKind::io: return "io";
    case ErrorKind::parse: return "parse";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace shiftlab
