#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace artrecon {

enum class ErrorCode {
  EmptyInput,
  DegenerateGeometry,
  InvalidAxisIndex,
  CycleDetected,
  StateLengthMismatch,
  IndexOutOfRange,
  SyntaxError,
  UnknownPart,
  DialectMismatch,
  UnsupportedJoint,
  UnresolvedLink,
  MissingMesh,
  NotWatertight,
  NoSurface,
  ExternalFormatError,
  BehindCamera,
  InvalidPrompt,
  MissingPivot,
  PredictorUnavailable,
  MalformedResponse,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries one of the codes above so the
// CLI can map it to a stable exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class SyntaxError : public Error {
 public:
  SyntaxError(int line, int column, const std::string& message)
      : Error(ErrorCode::SyntaxError,
              "line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + message),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

}  // namespace artrecon
