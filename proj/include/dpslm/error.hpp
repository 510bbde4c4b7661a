#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace dpslm {

// Error categories reported by the CLI and distinguishable by callers.
enum class ErrorCategory {
  Io,
  BadMagic,
  BadVersion,
  Truncated,
  NonFinite,
  Invariant,
  DimMismatch,
  BadArgument,
  Config,
  Degenerate,
  Unreachable,
};

inline std::string_view to_string(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Io: return "io";
    case ErrorCategory::BadMagic: return "bad_magic";
    case ErrorCategory::BadVersion: return "bad_version";
    case ErrorCategory::Truncated: return "truncated";
    case ErrorCategory::NonFinite: return "non_finite";
    case ErrorCategory::Invariant: return "invariant";
    case ErrorCategory::DimMismatch: return "dim_mismatch";
    case ErrorCategory::BadArgument: return "bad_argument";
    case ErrorCategory::Config: return "config";
    case ErrorCategory::Degenerate: return "degenerate";
    case ErrorCategory::Unreachable: return "unreachable_target";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

}  // namespace dpslm
