#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pkw {

enum class ErrorCode {
  InvalidArgument,
  NonPositiveOutletWidth,
  DegenerateGeometry,
  InfeasibleSpace,
  GridTooLarge,
  DegenerateRegion,
  StitchFailure,
  MalformedStl,
  EmptyMesh,
  DegenerateExtent,
  MalformedCloud,
  NonPhysical,
  OutOfRange,
  MissingGeometry,
  UnitError,
  ParseError,
  TooFewGeometries,
  EmptyBin,
  ZeroVariance,
  EmptyData,
  ShapeMismatch,
  NonFiniteLoss,
  MalformedModel,
  Io,
  ArtifactExists,
  GateFailure,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this type; `code()` is stable
// and is what the CLI prints in its machine-readable error record.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace pkw
