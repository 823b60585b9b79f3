#pragma once

#include <stdexcept>
#include <string>

namespace rigidflow {

enum class ErrorCode {
  kNonPositiveDepth,
  kNonPositiveInverseDepth,
  kOutOfBounds,
  kFactorizationFailure,
  kNegativeWeight,
  kNotPositiveDefinite,
  kShapeMismatch,
  kNonConvexWeights,
  kEmptyPredictions,
  kEmptyMask,
  kDegenerateScene,
  kInvalidArgument,
  kIo,
  kFormat,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::kNonPositiveInverseDepth: return "NonPositiveInverseDepth";
    case ErrorCode::kOutOfBounds: return "OutOfBounds";
    case ErrorCode::kFactorizationFailure: return "FactorizationFailure";
    case ErrorCode::kNegativeWeight: return "NegativeWeight";
    case ErrorCode::kNotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kNonConvexWeights: return "NonConvexWeights";
    case ErrorCode::kEmptyPredictions: return "EmptyPredictions";
    case ErrorCode::kEmptyMask: return "EmptyMask";
    case ErrorCode::kDegenerateScene: return "DegenerateScene";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kIo: return "Io";
    case ErrorCode::kFormat: return "Format";
  }
  return "Unknown";
}

}  // namespace rigidflow
