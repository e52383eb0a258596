#pragma once

#include <optional>
#include <string>
#include <vector>

#include "genderpair/parser.hpp"
#include "genderpair/report.hpp"
#include "genderpair/runner.hpp"
#include "genderpair/scorer.hpp"

namespace genderpair {

RunManifest make_run_manifest(const PromptFile& prompts, const ChatModel& model, const GenerationParams& params,
                              int repetitions, bool fixed_clock);

// One record per successful response; requests that failed upstream are not scored.
std::vector<ScoreRecord> score_run(const RunLog& run, ScorerClient& scorer, const ScoreOptions& options = {});

struct MetricsInputs {
  std::string label;
  const ParsedFile* parsed = nullptr;
  const ScoreFile* scores = nullptr;   // optional
  const PromptFile* prompts = nullptr; // required for perplexity
  LogprobModel* logprobs = nullptr;
  MetricsOptions options;
  bool force = false;
};

// Throws RegistryMismatch when parsed and scores come from different registry versions (unless forced),
// JoinFailure when they come from different runs.
BiasReport metrics_report(const MetricsInputs& in);

}  // namespace genderpair
