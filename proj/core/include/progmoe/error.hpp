#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace progmoe {

enum class ErrorKind {
  NonSquare,
  NegativeWeight,
  AsymmetryTooLarge,
  DuplicateRegionName,
  InvalidConnectome,
  DimensionMismatch,
  NonFiniteInput,
  ShapeMismatch,
  NonFiniteDetected,
  TapeConsumed,
  NonFiniteState,
  OutOfWindow,
  InfeasibleWindow,
  InvalidSubject,
  Diverged,
  DegenerateRange,
  InvalidConfig,
  ParseError,
  IoError,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NonSquare: return "NonSquare";
    case ErrorKind::NegativeWeight: return "NegativeWeight";
    case ErrorKind::AsymmetryTooLarge: return "AsymmetryTooLarge";
    case ErrorKind::DuplicateRegionName: return "DuplicateRegionName";
    case ErrorKind::InvalidConnectome: return "InvalidConnectome";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NonFiniteInput: return "NonFiniteInput";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteDetected: return "NonFiniteDetected";
    case ErrorKind::TapeConsumed: return "TapeConsumed";
    case ErrorKind::NonFiniteState: return "NonFiniteState";
    case ErrorKind::OutOfWindow: return "OutOfWindow";
    case ErrorKind::InfeasibleWindow: return "InfeasibleWindow";
    case ErrorKind::InvalidSubject: return "InvalidSubject";
    case ErrorKind::Diverged: return "Diverged";
    case ErrorKind::DegenerateRange: return "DegenerateRange";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the engine carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace progmoe
