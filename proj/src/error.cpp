#include "thermofuse/error.hpp"

namespace thermofuse {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::SingularTransform: return "SingularTransform";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::BandCountMismatch: return "BandCountMismatch";
    case ErrorCode::EmptyCrop: return "EmptyCrop";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegenerateCovariance: return "DegenerateCovariance";
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::UnknownClassIndex: return "UnknownClassIndex";
    case ErrorCode::CoordinateOutOfRange: return "CoordinateOutOfRange";
    case ErrorCode::MixedImageIds: return "MixedImageIds";
    case ErrorCode::InfeasibleStratification: return "InfeasibleStratification";
    case ErrorCode::CanvasMismatch: return "CanvasMismatch";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::UntrainedTree: return "UntrainedTree";
    case ErrorCode::InfeasiblePlacement: return "InfeasiblePlacement";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

namespace {

std::string format_message(ErrorCode code, const std::string& message, std::optional<int> line) {
  std::string out(to_string(code));
  if (line) out += " (line " + std::to_string(*line) + ")";
  out += ": ";
  out += message;
  return out;
}

}  // namespace

Error::Error(ErrorCode code, const std::string& message, std::optional<int> line)
    : std::runtime_error(format_message(code, message, line)), code_(code), detail_(message), line_(line) {}

}  // namespace thermofuse
