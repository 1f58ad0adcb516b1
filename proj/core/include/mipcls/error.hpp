#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mipcls {

enum class ErrorCode {
  InvalidArgument,
  IoFailure,
  BadMagic,
  UnsupportedDtype,
  UnsupportedLayout,
  InvalidHeader,
  TruncatedPayload,
  NonInvertibleAffine,
  LengthMismatch,
  WidthTooSmall,
  TooFewPhases,
  MissingPre,
  NonBinaryMask,
  GridMismatch,
  AlreadyNormalized,
  EmptyClass,
  DimMismatch,
  DegenerateLabels,
  TooFewPatients,
  EmptyGroup,
  ManifestParse,
  MissingBlob,
  SchemaMismatch,
};

std::string_view to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers switch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mipcls
