#include "masfm/error.hpp"

namespace masfm {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonPositiveDepth: return "NonPositiveDepth";
    case ErrorCode::DistortionNotInvertible: return "DistortionNotInvertible";
    case ErrorCode::InsufficientParallax: return "InsufficientParallax";
    case ErrorCode::BehindCamera: return "BehindCamera";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::ZeroLine: return "ZeroLine";
    case ErrorCode::TooFewMatches: return "TooFewMatches";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::InvalidInitialPoint: return "InvalidInitialPoint";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::TooFewCorrespondences: return "TooFewCorrespondences";
    case ErrorCode::MissingEpipolarLine: return "MissingEpipolarLine";
    case ErrorCode::DivergedBehindCamera: return "DivergedBehindCamera";
    case ErrorCode::UnderConstrained: return "UnderConstrained";
    case ErrorCode::NegativeRayParameter: return "NegativeRayParameter";
    case ErrorCode::EmptyUnregisteredSet: return "EmptyUnregisteredSet";
    case ErrorCode::ProviderDeclined: return "ProviderDeclined";
    case ErrorCode::TooFewImages: return "TooFewImages";
    case ErrorCode::PointBehindCamera: return "PointBehindCamera";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::AlignmentDegenerate: return "AlignmentDegenerate";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UsageError: return "UsageError";
  }
  return "UnknownError";
}

}  // namespace masfm
