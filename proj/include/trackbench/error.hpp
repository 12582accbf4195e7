#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trackbench {

enum class ErrorKind {
  TooFewPoints,
  DegenerateConfiguration,
  PointAtInfinity,
  OutOfBounds,
  DuplicateCameraPoint,
  IndexOutOfRange,
  EmptyMask,
  BranchingSkeleton,
  DisconnectedSkeleton,
  ImageFormat,
  MalformedLine,
  NonMonotonicFrames,
  NoDetections,
  DetectorFailed,
  EmptySequence,
  InvalidArgument,
  MissingKey,
  UnknownKey,
  FileNotFound,
  InvalidConfig,
  CalibrationGate,
  Io,
};

std::string_view to_string(ErrorKind kind);

// Base class for every error raised by the library. The kind is stable and
// machine-readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Raised when a configuration problem should map to the CLI's config exit code.
inline bool is_config_error(ErrorKind kind) {
  return kind == ErrorKind::MissingKey || kind == ErrorKind::UnknownKey ||
         kind == ErrorKind::FileNotFound || kind == ErrorKind::InvalidConfig;
}

}  // namespace trackbench
