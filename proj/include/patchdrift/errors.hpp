#pragma once

#include <stdexcept>
#include <string>

namespace patchdrift {

enum class ErrorCode {
  NonZeroRowSum,
  NegativeOffDiagonal,
  Reducible,
  SingularBeyondRankOne,
  NotPositiveDefinite,
  BadCorrelation,
  NotReversible,
  NotSymmetric,
  NotCommuting,
  QuadratureFailure,
  StepTooLarge,
  DegenerateNoDispersal,
  InconsistentSystem,
  BadMode,
  TrivialOnlySpectrum,
  SigmaNotPD,
  ConfigError,
  ModelError,
  IoError,
};

inline const char* error_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::NonZeroRowSum: return "NonZeroRowSum";
    case ErrorCode::NegativeOffDiagonal: return "NegativeOffDiagonal";
    case ErrorCode::Reducible: return "Reducible";
    case ErrorCode::SingularBeyondRankOne: return "SingularBeyondRankOne";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::BadCorrelation: return "BadCorrelation";
    case ErrorCode::NotReversible: return "NotReversible";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotCommuting: return "NotCommuting";
    case ErrorCode::QuadratureFailure: return "QuadratureFailure";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::DegenerateNoDispersal: return "DegenerateNoDispersal";
    case ErrorCode::InconsistentSystem: return "InconsistentSystem";
    case ErrorCode::BadMode: return "BadMode";
    case ErrorCode::TrivialOnlySpectrum: return "TrivialOnlySpectrum";
    case ErrorCode::SigmaNotPD: return "SigmaNotPD";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::ModelError: return "ModelError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace patchdrift
