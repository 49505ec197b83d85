#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stainforge {

// Every failure the library reports carries one of these codes. The CLI maps
// each code to a distinct process exit status (see exit_code()).
enum class ErrorCode {
  InvalidArgument,
  IoError,
  ParseError,
  InsufficientTissue,
  DegenerateStains,
  SingularMatrix,
  EmptySample,
  EmptyDataset,
  SingleClass,
  EmptyPredictions,
  GradientCheckFailed,
};

std::string_view to_string(ErrorCode code);

/// Process exit status for an error code. 0 is success, 1 is reserved for
/// unexpected failures, 2 for command-line usage errors and 14 for a batch
/// that finished with per-image failures.
int exit_code(ErrorCode code);

inline constexpr int kExitUnexpected = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitBatchFailures = 14;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace stainforge
