#include "mipcls/error.hpp"

namespace mipcls {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedDtype: return "UnsupportedDtype";
    case ErrorCode::UnsupportedLayout: return "UnsupportedLayout";
    case ErrorCode::InvalidHeader: return "InvalidHeader";
    case ErrorCode::TruncatedPayload: return "TruncatedPayload";
    case ErrorCode::NonInvertibleAffine: return "NonInvertibleAffine";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::WidthTooSmall: return "WidthTooSmall";
    case ErrorCode::TooFewPhases: return "TooFewPhases";
    case ErrorCode::MissingPre: return "MissingPre";
    case ErrorCode::NonBinaryMask: return "NonBinaryMask";
    case ErrorCode::GridMismatch: return "GridMismatch";
    case ErrorCode::AlreadyNormalized: return "AlreadyNormalized";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::DimMismatch: return "DimMismatch";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::TooFewPatients: return "TooFewPatients";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::ManifestParse: return "ManifestParse";
    case ErrorCode::MissingBlob: return "MissingBlob";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& what)
    : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

}  // namespace mipcls
