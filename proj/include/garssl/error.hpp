#pragma once

#include <string>
#include <utility>
#include <variant>

namespace garssl {

enum class ErrorCode {
  // geometry
  DegenerateBox,
  NonFinite,
  // schemas
  NoStructuredBlock,
  MalformedBlock,
  MissingField,
  WrongType,
  // client
  BackendUnavailable,
  ReplayMiss,
  MediaUnreadable,
  UnsupportedFormat,
  // prompts
  MissingBinding,
  ExtraBinding,
  // pipeline
  StageFailure,
  EmptyTrials,
  // dataset
  ParseError,
  DuplicateId,
  InvalidGroundTruth,
  DimensionMismatch,
  // metrics
  EmptyInput,
  MissingGroundTruth,
  // harness
  IdMismatch,
  ConfigError,
  ManifestError,
};

const char* error_code_name(ErrorCode code);

struct Error {
  ErrorCode code;
  std::string message;

  std::string describe() const { return std::string(error_code_name(code)) + ": " + message; }
};

inline Error make_error(ErrorCode code, std::string message) {
  return Error{code, std::move(message)};
}

/// Value-or-error carrier for every fallible operation in the library.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : v_(std::move(value)) {}
  Result(Error error) : v_(std::move(error)) {}

  bool ok() const { return std::holds_alternative<T>(v_); }
  explicit operator bool() const { return ok(); }

  T& value() & { return std::get<T>(v_); }
  const T& value() const& { return std::get<T>(v_); }
  T&& value() && { return std::get<T>(std::move(v_)); }

  const Error& error() const& { return std::get<Error>(v_); }
  Error&& error() && { return std::get<Error>(std::move(v_)); }

 private:
  std::variant<T, Error> v_;
};

/// Placeholder payload for operations that only report success/failure.
struct Unit {};
using Status = Result<Unit>;

inline Status ok_status() { return Status(Unit{}); }

}  // namespace garssl
