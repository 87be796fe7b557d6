#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cbm {

enum class ErrorKind {
  // data / format
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  DimensionMismatch,
  LengthMismatch,
  EmptyClass,
  DuplicateClass,
  RoleMismatch,
  NonFinite,
  InsufficientSamples,
  EmptySupport,
  EmptyScores,
  IoError,
  // configuration
  InvalidSpec,
  InvalidConfig,
  AlphaOutOfRange,
  KTooLarge,
  // numerical
  ZeroVector,
  NotNormalized,
  SingularSystem,
  EigenFailure,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Coarse grouping used by the CLI to pick an exit code.
enum class ErrorCategory { Usage, Data, Numerical };

ErrorCategory category_of(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  ErrorCategory category() const noexcept { return category_of(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace cbm
