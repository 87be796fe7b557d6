#include "cbm/error.hpp"

namespace cbm {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::DuplicateClass: return "DuplicateClass";
    case ErrorKind::RoleMismatch: return "RoleMismatch";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::InsufficientSamples: return "InsufficientSamples";
    case ErrorKind::EmptySupport: return "EmptySupport";
    case ErrorKind::EmptyScores: return "EmptyScores";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::AlphaOutOfRange: return "AlphaOutOfRange";
    case ErrorKind::KTooLarge: return "KTooLarge";
    case ErrorKind::ZeroVector: return "ZeroVector";
    case ErrorKind::NotNormalized: return "NotNormalized";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::EigenFailure: return "EigenFailure";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::InvalidSpec:
    case ErrorKind::InvalidConfig:
    case ErrorKind::AlphaOutOfRange:
    case ErrorKind::KTooLarge:
      return ErrorCategory::Usage;
    case ErrorKind::ZeroVector:
    case ErrorKind::NotNormalized:
    case ErrorKind::SingularSystem:
    case ErrorKind::EigenFailure:
      return ErrorCategory::Numerical;
    default:
      return ErrorCategory::Data;
  }
}

}  // namespace cbm
