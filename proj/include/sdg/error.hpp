#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdg {

enum class ErrorKind {
  InvalidInput,
  NotCommuting,
  DegenerateGame,
  InternalError,
  BonusIneffective,
  StartFailure,
  StepRejected,
  NearSingular,
  TrackingAmbiguity,
  RefinementFailure,
  FitUnreliable,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::NotCommuting: return "NotCommuting";
    case ErrorKind::DegenerateGame: return "DegenerateGame";
    case ErrorKind::InternalError: return "InternalError";
    case ErrorKind::BonusIneffective: return "BonusIneffective";
    case ErrorKind::StartFailure: return "StartFailure";
    case ErrorKind::StepRejected: return "StepRejected";
    case ErrorKind::NearSingular: return "NearSingular";
    case ErrorKind::TrackingAmbiguity: return "TrackingAmbiguity";
    case ErrorKind::RefinementFailure: return "RefinementFailure";
    case ErrorKind::FitUnreliable: return "FitUnreliable";
  }
  return "Unknown";
}

/// Exception carrying a machine-readable kind alongside the message.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace sdg
