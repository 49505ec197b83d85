#include "stainforge/error.hpp"

namespace stainforge {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::InsufficientTissue: return "InsufficientTissue";
    case ErrorCode::DegenerateStains: return "DegenerateStains";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::EmptyPredictions: return "EmptyPredictions";
    case ErrorCode::GradientCheckFailed: return "GradientCheckFailed";
  }
  return "Unknown";
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::IoError: return 3;
    case ErrorCode::ParseError: return 4;
    case ErrorCode::InsufficientTissue: return 5;
    case ErrorCode::DegenerateStains: return 6;
    case ErrorCode::SingularMatrix: return 7;
    case ErrorCode::EmptyDataset: return 8;
    case ErrorCode::SingleClass: return 9;
    case ErrorCode::EmptyPredictions: return 10;
    case ErrorCode::EmptySample: return 11;
    case ErrorCode::InvalidArgument: return 12;
    case ErrorCode::GradientCheckFailed: return 13;
  }
  return kExitUnexpected;
}

}  // namespace stainforge
