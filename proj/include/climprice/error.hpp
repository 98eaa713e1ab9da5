#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace climprice {

enum class ErrorCode {
  // configuration
  InvalidConfig,
  InvalidArgument,
  // data
  ParseError,
  IrregularCalendar,
  AllMasked,
  NoSectorsRemain,
  EmptyIntersection,
  InsufficientHistory,
  DegenerateThreshold,
  EmptyRegion,
  NonConformable,
  NonConformableMask,
  EmptyDomain,
  CenterOutsideDomain,
  EmptyFootprint,
  InsufficientSample,
  Io,
  // numerical
  RankDeficientDesign,
  ZeroCrossCovariance,
  SingularFactorCovariance,
};

enum class ErrorCategory { Config, Data, Numerical };

constexpr ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidConfig:
    case ErrorCode::InvalidArgument:
      return ErrorCategory::Config;
    case ErrorCode::RankDeficientDesign:
    case ErrorCode::ZeroCrossCovariance:
    case ErrorCode::SingularFactorCovariance:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Data;
  }
}

std::string_view to_string(ErrorCode code);

// Single exception type; `code()` distinguishes the failure mode.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace climprice
