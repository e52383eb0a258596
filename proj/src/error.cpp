#include "genderpair/error.hpp"

namespace genderpair {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::MissingFile: return "MissingFile";
    case ErrorCode::SchemaViolation: return "SchemaViolation";
    case ErrorCode::DuplicateTriplet: return "DuplicateTriplet";
    case ErrorCode::BraceInSurface: return "BraceInSurface";
    case ErrorCode::GroupMismatch: return "GroupMismatch";
    case ErrorCode::EmptySelection: return "EmptySelection";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::JoinFailure: return "JoinFailure";
    case ErrorCode::UndefinedBPR: return "UndefinedBPR";
    case ErrorCode::MissingGroup: return "MissingGroup";
    case ErrorCode::MetricMismatch: return "MetricMismatch";
    case ErrorCode::RankShortfall: return "RankShortfall";
    case ErrorCode::OrphanResponse: return "OrphanResponse";
    case ErrorCode::MissingResponse: return "MissingResponse";
    case ErrorCode::DuplicateResponse: return "DuplicateResponse";
    case ErrorCode::UnauditedRecord: return "UnauditedRecord";
    case ErrorCode::ParityUnverified: return "ParityUnverified";
    case ErrorCode::EmptyExport: return "EmptyExport";
    case ErrorCode::IncompleteMetrics: return "IncompleteMetrics";
    case ErrorCode::RegistryMismatch: return "RegistryMismatch";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::EndpointUnreachable: return "EndpointUnreachable";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::LogprobsUnsupported: return "LogprobsUnsupported";
    case ErrorCode::ScorerUnavailable: return "ScorerUnavailable";
    case ErrorCode::ScorerProtocolViolation: return "ScorerProtocolViolation";
  }
  return "Unknown";
}

std::optional<ErrorCode> error_code_from_string(std::string_view name) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::ScorerProtocolViolation); ++i) {
    auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == name) return code;
  }
  return std::nullopt;
}

bool is_upstream(ErrorCode code) {
  switch (code) {
    case ErrorCode::EndpointUnreachable:
    case ErrorCode::RateLimited:
    case ErrorCode::MalformedResponse:
    case ErrorCode::LogprobsUnsupported:
    case ErrorCode::ScorerUnavailable:
    case ErrorCode::ScorerProtocolViolation:
      return true;
    default:
      return false;
  }
}

int exit_code_for(ErrorCode code) { return is_upstream(code) ? 2 : 1; }

}  // namespace genderpair
