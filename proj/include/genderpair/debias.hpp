#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "genderpair/promptgen.hpp"
#include "genderpair/scorer.hpp"

namespace genderpair {

inline constexpr std::string_view kDebiasSchema = "genderpair-debias/1";
inline constexpr std::string_view kFinetuneConfigSchema = "genderpair-finetune-config/1";

struct DebiasPrompt {
  std::string record_id;
  GroupId group = GroupId::Group1;
  GenderTarget target;
  std::string anti_descriptor;
  std::string text;
  bool operator==(const DebiasPrompt&) const = default;
};

std::string render_debias_text(std::string_view target, std::string_view anti_descriptor);

// Benchmark identities, titles and pronouns plus the top `names_top` names by rank.
// Throws RankShortfall when the registry has fewer ranked names.
std::vector<GenderTarget> expanded_targets(const GenderTargetRegistry& registry, GroupId g, size_t names_top);

// Distinct anti-biased descriptors ordered by (rank, source), skipping any that is a biased
// descriptor of the same group. Throws RankShortfall when fewer than `top` remain.
std::vector<std::string> ranked_anti_descriptors(const GenderTargetRegistry& registry, GroupId g, size_t top);

// Held-out benchmark prompts the forge must not leak.
class HoldoutGuard {
 public:
  HoldoutGuard() = default;
  // strict = also exclude every (target, anti-descriptor) pair that co-occurs in a held-out prompt.
  HoldoutGuard(std::span<const AssessmentPrompt> holdout, bool strict);

  // Reason string when refused.
  std::optional<std::string> refuses(const DebiasPrompt& p) const;
  bool empty() const { return texts_.empty(); }

 private:
  std::set<std::string> texts_;
  std::set<std::pair<std::string, std::string>> verbatim_pairs_;
  std::set<std::pair<std::string, std::string>> cooccurring_pairs_;
  bool strict_ = false;
};

struct DebiasOptions {
  size_t names_top = 50;
  size_t descriptors_top = 50;
  std::vector<GroupId> groups = {GroupId::Group1, GroupId::Group2, GroupId::Group3};
};

struct DebiasGeneration {
  std::vector<DebiasPrompt> prompts;
  std::array<size_t, 3> expected{};  // |targets_expanded| x descriptors_top per group
  size_t refused = 0;
  std::vector<std::string> refusal_reasons;
};

DebiasGeneration generate_debias_prompts(const GenderTargetRegistry& registry, const DebiasOptions& options,
                                         const HoldoutGuard& guard = {});

enum class ReviewStatus : uint8_t { Draft, AutoAudited, HumanApproved, Rejected };
std::string_view to_string(ReviewStatus s);
std::optional<ReviewStatus> review_status_from_string(std::string_view s);

struct AuditResult {
  double toxicity = 0.0;
  RegardScores regard;
  size_t biased_descriptor_hits = 0;
  std::vector<std::string> reasons;
  bool operator==(const AuditResult&) const = default;
};

struct DebiasRecord {
  DebiasPrompt prompt;
  std::string response;
  ReviewStatus status = ReviewStatus::Draft;
  bool human_decision = false;  // status was set by a reviewer and audit must not override it
  std::optional<AuditResult> audit;
  std::string review_note;
  bool operator==(const DebiasRecord&) const = default;
};

Json to_json(const DebiasPrompt& p);
DebiasPrompt debias_prompt_from_json(const Json& j);
Json to_json(const DebiasRecord& r);
DebiasRecord debias_record_from_json(const Json& j);

struct DebiasFile {
  Json header;
  std::vector<DebiasPrompt> prompts;  // content == "prompts"
  std::vector<DebiasRecord> records;  // content == "records"
};
void write_debias_prompts(const std::filesystem::path& path, const std::vector<DebiasPrompt>& prompts,
                          const GenderTargetRegistry& registry, const DebiasOptions& options);
void write_debias_records(const std::filesystem::path& path, const std::vector<DebiasRecord>& records,
                          const Json& extra_header = Json::object());
DebiasFile read_debias(const std::filesystem::path& path);

struct IngestReport {
  std::vector<DebiasRecord> records;
  std::vector<std::string> orphans;     // response ids with no prompt
  std::vector<std::string> missing;     // prompt ids with no response
  std::vector<std::string> duplicates;  // ids seen again; the first response is kept
};

IngestReport ingest_responses(const std::vector<DebiasPrompt>& prompts, const std::filesystem::path& responses);
IngestReport ingest_responses(const std::vector<DebiasPrompt>& prompts,
                              const std::vector<std::pair<std::string, std::string>>& responses);

// Whole-word, case-insensitive count of the group's biased descriptors in `text`.
size_t biased_descriptor_hits(const GenderTargetRegistry& registry, GroupId g, std::string_view text);

struct AuditOptions {
  double toxicity_max = 0.1;
  double parity_sigma_max = 0.05;
};

struct ParityReport {
  std::array<std::optional<double>, 3> mean_positive;
  std::array<size_t, 3> passing{};
  std::optional<double> sigma;
  double threshold = 0.05;
  bool passed = false;
  std::string reason;
};

// Population sigma of mean regard-positive over exportable records, per group.
ParityReport compute_parity(const std::vector<DebiasRecord>& records, double threshold);
Json to_json(const ParityReport& p);

struct AuditOutcome {
  std::vector<DebiasRecord> records;
  ParityReport parity;
  size_t auto_audited = 0;
  size_t rejected = 0;
};

// Throws ScorerUnavailable when any response could not be scored.
AuditOutcome audit_records(std::vector<DebiasRecord> records, const GenderTargetRegistry& registry,
                           ScorerClient& scorer, const AuditOptions& options = {});

struct ReviewDecision {
  std::string record_id;
  bool approve = false;
  std::string note;
};
std::vector<ReviewDecision> read_review_decisions(const std::filesystem::path& path);
// Throws InvalidInput for unknown ids or approval of a record with biased-descriptor hits.
std::vector<DebiasRecord> apply_review(std::vector<DebiasRecord> records, const std::vector<ReviewDecision>& decisions);

enum class ExportFormat : uint8_t { InstructionPairs, ChatTurns };
std::optional<ExportFormat> export_format_from_string(std::string_view s);
std::string_view to_string(ExportFormat f);

struct LoraConfig {
  int rank = 8;
  double alpha = 16.0;
  double dropout = 0.05;
  std::vector<std::string> target_modules = {"q_proj", "v_proj"};
};

struct ExportOptions {
  ExportFormat format = ExportFormat::InstructionPairs;
  double parity_sigma_max = 0.05;
  LoraConfig lora;
};

struct ExportResult {
  size_t examples = 0;
  size_t skipped_rejected = 0;
  ParityReport parity;
  Json config;
};

// Throws UnauditedRecord, EmptyExport, ParityUnverified.
ExportResult export_finetune(const std::vector<DebiasRecord>& records, const GenderTargetRegistry& registry,
                             const ExportOptions& options, const std::filesystem::path& dataset_path,
                             const std::filesystem::path& config_path);

}  // namespace genderpair
