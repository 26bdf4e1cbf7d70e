#pragma once

#include <stdexcept>
#include <string>

namespace mmflow {

enum class ErrorCode {
  DisconnectedGraph,
  NonpositiveLength,
  NonpositiveMeasure,
  BadParams,
  UnknownKind,
  SchemaViolation,
  IoFailure,
  PerimeterTooLarge,
  SpaceMismatch,
  SizeCap,
  EigFailure,
  NegativeTime,
  NonpositiveAlpha,
  MarginalMismatch,
  SolverFailure,
  NoConvergence,
  GridTooCoarse,
  BoundaryIndex,
  ZeroDensity,
  InnerSolverFailure,
  Infeasible,
  DegenerateGamma,
  NegativeTestFunction,
  ConstantEigenfunction,
  AlphaTooSmall,
  FamilyMismatch,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DisconnectedGraph: return "DisconnectedGraph";
    case ErrorCode::NonpositiveLength: return "NonpositiveLength";
    case ErrorCode::NonpositiveMeasure: return "NonpositiveMeasure";
    case ErrorCode::BadParams: return "BadParams";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::PerimeterTooLarge: return "PerimeterTooLarge";
    case ErrorCode::SpaceMismatch: return "SpaceMismatch";
    case ErrorCode::SizeCap: return "SizeCap";
    case ErrorCode::EigFailure: return "EigFailure";
    case ErrorCode::NegativeTime: return "NegativeTime";
    case ErrorCode::NonpositiveAlpha: return "NonpositiveAlpha";
    case ErrorCode::MarginalMismatch: return "MarginalMismatch";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::BoundaryIndex: return "BoundaryIndex";
    case ErrorCode::ZeroDensity: return "ZeroDensity";
    case ErrorCode::InnerSolverFailure: return "InnerSolverFailure";
    case ErrorCode::Infeasible: return "Infeasible";
    case ErrorCode::DegenerateGamma: return "DegenerateGamma";
    case ErrorCode::NegativeTestFunction: return "NegativeTestFunction";
    case ErrorCode::ConstantEigenfunction: return "ConstantEigenfunction";
    case ErrorCode::AlphaTooSmall: return "AlphaTooSmall";
    case ErrorCode::FamilyMismatch: return "FamilyMismatch";
  }
  return "Unknown";
}

/// Single exception type for the library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mmflow
