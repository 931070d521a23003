#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace oeg {

enum class ErrorKind {
  InvalidArgument,
  DegenerateShape,
  CutLocus,
  NotSPD,
  RateMismatch,
  LengthMismatch,
  RankTooLow,
  TooShort,
  PriorMismatch,
  EmptyControls,
  SingularSystem,
  ZeroVariance,
  InvalidScore,
  InsufficientCohort,
  RankTooLarge,
  Format,
  MissingArtifact,
  ConfigMismatch,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a kind so callers (and the CLI
// exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace oeg
