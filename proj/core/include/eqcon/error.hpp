#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace eqcon {

/// Failure categories surfaced by the library. The CLI maps these onto exit
/// codes, so new entries must also be classified in `is_numeric_failure`.
enum class ErrorCode {
  DimensionMismatch,
  NonFiniteInput,
  RankDeficient,
  InvalidArgument,
  IllConditioned,
  DegenerateMarginal,
  OutOfSupport,
  InfeasibleTarget,
  LpFailure,
  ZeroVector,
  NonFiniteLoss,
  ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// True for failures caused by the numerics rather than by bad input.
bool is_numeric_failure(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace eqcon
