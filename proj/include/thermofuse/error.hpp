#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace thermofuse {

enum class ErrorCode {
  InvalidArgument,
  SingularTransform,
  DegenerateConfiguration,
  BandCountMismatch,
  EmptyCrop,
  DimensionMismatch,
  DegenerateCovariance,
  ZeroVariance,
  MalformedLine,
  UnknownClassIndex,
  CoordinateOutOfRange,
  MixedImageIds,
  InfeasibleStratification,
  CanvasMismatch,
  EmptyTrainingSet,
  UntrainedTree,
  InfeasiblePlacement,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the whole library; callers dispatch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::optional<int> line = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  std::optional<int> line() const noexcept { return line_; }
  const std::string& detail() const noexcept { return detail_; }

  // I/O failures map to exit code 2, everything else to 1.
  bool is_io() const noexcept { return code_ == ErrorCode::IoError; }

 private:
  ErrorCode code_;
  std::string detail_;
  std::optional<int> line_;
};

}  // namespace thermofuse
