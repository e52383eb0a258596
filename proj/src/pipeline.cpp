#include "genderpair/pipeline.hpp"

#include <fmt/format.h>

namespace genderpair {

RunManifest make_run_manifest(const PromptFile& prompts, const ChatModel& model, const GenerationParams& params,
                              int repetitions, bool fixed_clock) {
  RunManifest m;
  if (prompts.header.is_object()) m.registry_version = prompts.header.value("registry_version", "");
  m.prompts_sha256 = prompts_digest(prompts.prompts);
  m.endpoint = model.endpoint_id();
  m.params = params;
  m.repetitions = repetitions;
  m.tool_version = std::string(tool_version());
  m.created = fixed_clock ? std::string(kFixedTimestamp) : utc_timestamp_now();
  return m;
}

std::vector<ScoreRecord> score_run(const RunLog& run, ScorerClient& scorer, const ScoreOptions& options) {
  std::vector<const ResponseRecord*> ok;
  std::vector<std::string> texts;
  for (const auto& r : run.records) {
    if (r.failed()) continue;
    ok.push_back(&r);
    texts.push_back(r.raw_text);
  }
  if (texts.empty()) return {};
  auto outcomes = score_texts(texts, scorer, options);
  std::vector<ScoreRecord> out;
  out.reserve(ok.size());
  for (size_t i = 0; i < ok.size(); ++i) {
    ScoreRecord s;
    s.prompt_id = ok[i]->prompt_id;
    s.repetition_index = ok[i]->repetition_index;
    s.group = ok[i]->group;
    s.score = outcomes[i].score;
    s.error = outcomes[i].error;
    s.message = outcomes[i].message;
    out.push_back(std::move(s));
  }
  return out;
}

BiasReport metrics_report(const MetricsInputs& in) {
  if (!in.parsed) throw Error(ErrorCode::InvalidInput, "metrics need parsed selections");
  const RunManifest& run = in.parsed->run_manifest;
  Json manifest = to_json(run);
  std::span<const ScoreRecord> scores;
  if (in.scores) {
    Json other = in.scores->header.value("run_manifest", Json::object());
    std::string other_version = other.value("registry_version", "");
    if (other_version != run.registry_version && !in.force) {
      throw Error(ErrorCode::RegistryMismatch,
                  fmt::format("parsed uses registry {}, scores use {}", run.registry_version, other_version));
    }
    if (other.value("prompts_sha256", "") != run.prompts_sha256 || other.value("endpoint", "") != run.endpoint) {
      throw Error(ErrorCode::JoinFailure, "scores were computed for a different run");
    }
    manifest["scorer_id"] = in.scores->header.value("scorer", "");
    scores = in.scores->records;
  }
  if (in.prompts && in.prompts->header.value("registry_version", "") != run.registry_version && !in.force) {
    throw Error(ErrorCode::RegistryMismatch, "prompt file and run use different registry versions");
  }
  ReportInputs ri;
  ri.label = in.label;
  ri.registry_version = run.registry_version;
  ri.groups = aggregate_metrics(in.parsed->selections, scores, in.prompts, in.logprobs, in.options);
  if (in.parsed->header.contains("stats")) ri.parse_stats = parse_stats_from_json(in.parsed->header["stats"]);
  ri.manifests.push_back(std::move(manifest));
  return build_report(ri);
}

}  // namespace genderpair
