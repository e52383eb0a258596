#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace genderpair {

enum class ErrorCode {
  // validation (exit code 1)
  MissingFile,
  SchemaViolation,
  DuplicateTriplet,
  BraceInSurface,
  GroupMismatch,
  EmptySelection,
  InvalidInput,
  JoinFailure,
  UndefinedBPR,
  MissingGroup,
  MetricMismatch,
  RankShortfall,
  OrphanResponse,
  MissingResponse,
  DuplicateResponse,
  UnauditedRecord,
  ParityUnverified,
  EmptyExport,
  IncompleteMetrics,
  RegistryMismatch,
  IoError,
  // upstream (exit code 2)
  EndpointUnreachable,
  RateLimited,
  MalformedResponse,
  LogprobsUnsupported,
  ScorerUnavailable,
  ScorerProtocolViolation,
};

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> error_code_from_string(std::string_view name);
bool is_upstream(ErrorCode code);

// Process exit code a CLI should return for an error of this kind.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace genderpair
