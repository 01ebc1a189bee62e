#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace insightpilot {

/// Every failure the library raises carries one of these codes. The service
/// layer maps each code to exactly one HTTP status and wire code string.
enum class ErrorCode {
  SyntaxError,
  SchemaError,
  UnknownView,
  ProviderError,
  MalformedTutorial,
  IoError,
  RaggedRow,
  EmptyFile,
  UnknownDim,
  UnknownMeasure,
  TypeMismatch,
  EmptyBase,
  TooFewPoints,
  DegenerateDistribution,
  ZeroVariance,
  MisalignedSeries,
  ZeroTotal,
  KeyNotFound,
  PlanParseError,
  SubjectResolutionError,
  AnnotationTargetMissing,
  MissingInput,
  NoOpenRound,
  UnknownRound,
  RoundStillOpen,
  CorruptSession,
  EmptyRound,
  MissingImage,
  UnsupportedTask,
  InvalidArgument,
  NotFound,
  Conflict,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::UnknownView: return "UnknownView";
    case ErrorCode::ProviderError: return "ProviderError";
    case ErrorCode::MalformedTutorial: return "MalformedTutorial";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::EmptyFile: return "EmptyFile";
    case ErrorCode::UnknownDim: return "UnknownDim";
    case ErrorCode::UnknownMeasure: return "UnknownMeasure";
    case ErrorCode::TypeMismatch: return "TypeMismatch";
    case ErrorCode::EmptyBase: return "EmptyBase";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::DegenerateDistribution: return "DegenerateDistribution";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::MisalignedSeries: return "MisalignedSeries";
    case ErrorCode::ZeroTotal: return "ZeroTotal";
    case ErrorCode::KeyNotFound: return "KeyNotFound";
    case ErrorCode::PlanParseError: return "PlanParseError";
    case ErrorCode::SubjectResolutionError: return "SubjectResolutionError";
    case ErrorCode::AnnotationTargetMissing: return "AnnotationTargetMissing";
    case ErrorCode::MissingInput: return "MissingInput";
    case ErrorCode::NoOpenRound: return "NoOpenRound";
    case ErrorCode::UnknownRound: return "UnknownRound";
    case ErrorCode::RoundStillOpen: return "RoundStillOpen";
    case ErrorCode::CorruptSession: return "CorruptSession";
    case ErrorCode::EmptyRound: return "EmptyRound";
    case ErrorCode::MissingImage: return "MissingImage";
    case ErrorCode::UnsupportedTask: return "UnsupportedTask";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Conflict: return "Conflict";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string path = {})
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code),
        detail_(message),
        path_(std::move(path)) {}

  ErrorCode code() const noexcept { return code_; }
  /// Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }
  /// Location inside a document (spec path, row index, ...), empty if n/a.
  const std::string& path() const noexcept { return path_; }

 private:
  ErrorCode code_;
  std::string detail_;
  std::string path_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message,
                              std::string path = {}) {
  throw Error(code, message, std::move(path));
}

}  // namespace insightpilot
