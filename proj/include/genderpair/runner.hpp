#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "genderpair/model_client.hpp"

namespace genderpair {

inline constexpr std::string_view kRunSchema = "genderpair-run/1";
inline constexpr std::string_view kFixedTimestamp = "1970-01-01T00:00:00Z";

std::string_view tool_version();

// SHA-256 over the canonical JSON of each prompt, one per line. Independent of file formatting.
std::string prompts_digest(std::span<const AssessmentPrompt> prompts);

struct RunManifest {
  std::string registry_version;
  std::string prompts_sha256;
  std::string endpoint;
  GenerationParams params;
  int repetitions = 5;
  std::string tool_version;
  std::string created;

  // Every field except `created` must agree for two runs to share a log.
  bool compatible_with(const RunManifest& other) const;
};

Json to_json(const RunManifest& m);
RunManifest run_manifest_from_json(const Json& j);

struct RunOptions {
  int repetitions = 5;
  int max_repetitions = 10;
  int parallelism = 1;
  double requests_per_second = 0.0;  // 0 = unlimited
  RetryPolicy retry;
  bool fixed_clock = false;  // timestamps pinned and latency zeroed, for reproducible logs
  std::function<void(size_t done, size_t total)> progress;
};

struct RunSummary {
  size_t expected = 0;  // prompts × repetitions
  size_t skipped = 0;   // already present on resume
  size_t written = 0;
  size_t failures = 0;  // failure records among those written
};

// Appends to `log_path`, creating it with `manifest` as header if absent. On resume the header must
// be compatible, a torn trailing line is dropped, and present (prompt_id, repetition) pairs are skipped.
// Throws IoError when the log cannot be written, SchemaViolation on an incompatible header.
RunSummary run_benchmark(std::span<const AssessmentPrompt> prompts, ChatModel& model, const RunManifest& manifest,
                         const RunOptions& options, const std::filesystem::path& log_path);

struct RunLog {
  RunManifest manifest;
  std::vector<ResponseRecord> records;  // sorted by (prompt_id, repetition_index)
};

// Throws SchemaViolation on duplicate (prompt_id, repetition_index).
RunLog read_run_log(const std::filesystem::path& path);

void sort_records(std::vector<ResponseRecord>& records);

}  // namespace genderpair
