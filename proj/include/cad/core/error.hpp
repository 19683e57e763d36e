#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cad {

enum class ErrorCode {
  InvalidArgument,
  ConfigError,
  Io,
  MalformedFile,
  MalformedLine,
  NonOrthonormal,
  SpecMismatch,
  InsufficientLabels,
  TrajectoryOutOfRange,
  PlacementFailure,
  EgoBlocked,
  NoGroundReference,
  ShapeMismatch,
  IndexOutOfRange,
  EmptyBatch,
  InsufficientData,
  MissingTags,
  MissingPrerequisite,
  Numerical,
};

std::string_view to_string(ErrorCode code);

// Every failure in the library surfaces as a cad::Error carrying a code, so
// callers (the CLI in particular) can map failures to exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) { throw Error(code, what); }

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::MalformedFile: return "MalformedFile";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::NonOrthonormal: return "NonOrthonormal";
    case ErrorCode::SpecMismatch: return "SpecMismatch";
    case ErrorCode::InsufficientLabels: return "InsufficientLabels";
    case ErrorCode::TrajectoryOutOfRange: return "TrajectoryOutOfRange";
    case ErrorCode::PlacementFailure: return "PlacementFailure";
    case ErrorCode::EgoBlocked: return "EgoBlocked";
    case ErrorCode::NoGroundReference: return "NoGroundReference";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::MissingTags: return "MissingTags";
    case ErrorCode::MissingPrerequisite: return "MissingPrerequisite";
    case ErrorCode::Numerical: return "NumericalError";
  }
  return "Unknown";
}

}  // namespace cad
