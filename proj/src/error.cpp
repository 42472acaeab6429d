#include "artrecon/error.hpp"

namespace artrecon {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::InvalidAxisIndex: return "InvalidAxisIndex";
    case ErrorCode::CycleDetected: return "CycleDetected";
    case ErrorCode::StateLengthMismatch: return "StateLengthMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownPart: return "UnknownPart";
    case ErrorCode::DialectMismatch: return "DialectMismatch";
    case ErrorCode::UnsupportedJoint: return "UnsupportedJoint";
    case ErrorCode::UnresolvedLink: return "UnresolvedLink";
    case ErrorCode::MissingMesh: return "MissingMesh";
    case ErrorCode::NotWatertight: return "NotWatertight";
    case ErrorCode::NoSurface: return "NoSurface";
    case ErrorCode::ExternalFormatError: return "ExternalFormatError";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::InvalidPrompt: return "InvalidPrompt";
    case ErrorCode::MissingPivot: return "MissingPivot";
    case ErrorCode::PredictorUnavailable: return "PredictorUnavailable";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace artrecon
