#include "eqcon/error.hpp"

namespace eqcon {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IllConditioned: return "IllConditioned";
    case ErrorCode::DegenerateMarginal: return "DegenerateMarginal";
    case ErrorCode::OutOfSupport: return "OutOfSupport";
    case ErrorCode::InfeasibleTarget: return "InfeasibleTarget";
    case ErrorCode::LpFailure: return "LpFailure";
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

bool is_numeric_failure(ErrorCode code) noexcept {
  return code == ErrorCode::IllConditioned || code == ErrorCode::LpFailure ||
         code == ErrorCode::NonFiniteLoss;
}

}  // namespace eqcon
