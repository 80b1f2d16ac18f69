#include "pkw/error.hpp"

namespace pkw {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NonPositiveOutletWidth: return "NonPositiveOutletWidth";
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::InfeasibleSpace: return "InfeasibleSpace";
    case ErrorCode::GridTooLarge: return "GridTooLarge";
    case ErrorCode::DegenerateRegion: return "DegenerateRegion";
    case ErrorCode::StitchFailure: return "StitchFailure";
    case ErrorCode::MalformedStl: return "MalformedStl";
    case ErrorCode::EmptyMesh: return "EmptyMesh";
    case ErrorCode::DegenerateExtent: return "DegenerateExtent";
    case ErrorCode::MalformedCloud: return "MalformedCloud";
    case ErrorCode::NonPhysical: return "NonPhysical";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::MissingGeometry: return "MissingGeometry";
    case ErrorCode::UnitError: return "UnitError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::TooFewGeometries: return "TooFewGeometries";
    case ErrorCode::EmptyBin: return "EmptyBin";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::EmptyData: return "EmptyData";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::MalformedModel: return "MalformedModel";
    case ErrorCode::Io: return "Io";
    case ErrorCode::ArtifactExists: return "ArtifactExists";
    case ErrorCode::GateFailure: return "GateFailure";
  }
  return "Unknown";
}

}  // namespace pkw
