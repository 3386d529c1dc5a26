#pragma once

#include <stdexcept>
#include <string>

namespace masfm {

enum class ErrorCode {
  // camera_geometry
  NonPositiveDepth,
  DistortionNotInvertible,
  // estimation
  InsufficientParallax,
  BehindCamera,
  DegenerateConfiguration,
  ZeroLine,
  // ransac
  TooFewMatches,
  NoConsensus,
  // nlls
  InvalidInitialPoint,
  NumericalFailure,
  // pnp
  TooFewCorrespondences,
  MissingEpipolarLine,
  DivergedBehindCamera,
  // bundle
  UnderConstrained,
  NegativeRayParameter,
  // pipeline
  EmptyUnregisteredSet,
  ProviderDeclined,
  // scene model
  TooFewImages,
  PointBehindCamera,
  // eval
  IdMismatch,
  AlignmentDegenerate,
  // synth
  InvalidSpec,
  // io / cli
  IoError,
  UsageError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace masfm
