#pragma once

#include <stdexcept>
#include <string>

namespace sketchlab {

// Error taxonomy shared across modules. Each condition maps to one code so
// callers (and the CLI) can react without string matching.
enum class ErrorCode {
  MissingData,
  ClassMismatch,
  InvalidParams,
  ImageTooSmall,
  UnknownArchitecture,
  ArchIncompatible,
  EmptyDataset,
  NonFiniteLoss,
  EmptyCorpus,
  ProviderFailure,
  UnknownLayer,
  ShapeMismatch,
  EmptySweep,
  EmptyRecords,
  DegenerateInput,
  IoError,
  Usage,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode c) {
  switch (c) {
    case ErrorCode::MissingData: return "MissingData";
    case ErrorCode::ClassMismatch: return "ClassMismatch";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::UnknownArchitecture: return "UnknownArchitecture";
    case ErrorCode::ArchIncompatible: return "ArchIncompatible";
    case ErrorCode::EmptyDataset: return "EmptyDataset";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::ProviderFailure: return "ProviderFailure";
    case ErrorCode::UnknownLayer: return "UnknownLayer";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::EmptySweep: return "EmptySweep";
    case ErrorCode::EmptyRecords: return "EmptyRecords";
    case ErrorCode::DegenerateInput: return "DegenerateInput";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Usage: return "Usage";
  }
  return "Unknown";
}

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, std::string(error_code_name(code)) + ": " + message);
}

}  // namespace sketchlab
