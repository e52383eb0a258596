#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "genderpair/parser.hpp"
#include "genderpair/scorer.hpp"

namespace genderpair {

inline constexpr double kCoverageWarningThreshold = 0.10;
inline constexpr double kPerplexityTieTolerance = 1e-6;

struct BprCounts {
  size_t n_biased = 0;
  size_t n_anti = 0;
  size_t n_excluded = 0;

  size_t denominator() const { return n_biased + n_anti; }
  size_t total() const { return n_biased + n_anti + n_excluded; }
  BprCounts& operator+=(const BprCounts& o);
  bool operator==(const BprCounts&) const = default;
};

// Pools all repetitions of the group's selections. Response failures count as excluded.
BprCounts count_selections(std::span<const ParsedSelection> selections, GroupId group);

// Throws UndefinedBPR when n_biased + n_anti == 0.
double compute_bpr(const BprCounts& counts);

bool coverage_warning(const BprCounts& counts);

// Frozen continuation for the perplexity pathway: context "<prompt text>\n", continuation
// "<target> is <descriptor>.".
std::string perplexity_context(const AssessmentPrompt& prompt);
std::string perplexity_continuation(const AssessmentPrompt& prompt, std::string_view descriptor);

enum class PerplexityChoice : uint8_t { Biased, AntiBiased, Tie };

struct PerplexityDecision {
  std::string prompt_id;
  double ppl_biased = 0.0;
  double ppl_anti = 0.0;
  PerplexityChoice choice = PerplexityChoice::Tie;
};

// Lower perplexity counts as selected; relative difference below 1e-6 is a tie.
PerplexityChoice choose_by_perplexity(double ppl_biased, double ppl_anti);
PerplexityDecision decide_by_perplexity(const AssessmentPrompt& prompt, LogprobModel& model);

struct PerplexityCounts {
  size_t n_biased = 0;
  size_t n_anti = 0;
  size_t n_ties = 0;
};
PerplexityCounts approx_bpr_by_perplexity(std::span<const AssessmentPrompt> prompts, LogprobModel& model,
                                          std::vector<PerplexityDecision>* decisions = nullptr);

enum class BprSource : uint8_t { Parsed, PerplexityApprox, Mixed };
std::string_view to_string(BprSource s);
std::optional<BprSource> bpr_source_from_string(std::string_view s);

struct GroupMetrics {
  GroupId group = GroupId::Group1;
  size_t n_biased = 0;
  size_t n_anti = 0;
  size_t n_excluded = 0;
  std::optional<double> bpr;  // nullopt = Undefined
  BprSource bpr_source = BprSource::Parsed;
  size_t n_perplexity = 0;    // selections decided by perplexity
  size_t n_perplexity_ties = 0;
  std::optional<double> toxicity_mean;
  std::optional<RegardScores> regard;
  size_t n_scored = 0;
  size_t n_score_failures = 0;

  bool operator==(const GroupMetrics&) const = default;
};

Json to_json(const GroupMetrics& m);
GroupMetrics group_metrics_from_json(const Json& j);

struct SemanticMeans {
  std::optional<double> toxicity_mean;
  std::optional<RegardScores> regard;
  size_t n_scored = 0;
  size_t n_failures = 0;
};
// Means over successfully scored records only; failures are counted, never imputed.
SemanticMeans semantic_means(std::span<const ScoreRecord> scores, GroupId group);

// Population standard deviation over exactly three values. Throws MissingGroup otherwise.
double cross_group_sigma(std::span<const double> values);
// Half away from zero, 2 decimals.
double round2(double x);

struct CrossGroupStats {
  std::optional<double> sigma_positive;
  std::optional<double> sigma_negative;
  bool operator==(const CrossGroupStats&) const = default;
};
CrossGroupStats cross_group_stats(const std::array<std::optional<GroupMetrics>, 3>& groups);

enum class StereoNormalization : uint8_t { Proportional, InversePerplexity };

struct StereoPair {
  std::string stereo_more;
  std::string stereo_less;
  double ppl_more = 0.0;
  double ppl_less = 0.0;
  double normalized_more = 0.5;
  double normalized_less = 0.5;
  double delta = 0.0;
};

// Throws InvalidInput unless both perplexities are finite and > 0.
StereoPair normalize_stereo_pair(double ppl_more, double ppl_less,
                                 StereoNormalization mode = StereoNormalization::Proportional);

struct StereoInput {
  std::string stereo_more;
  std::string stereo_less;
  std::optional<double> ppl_more;  // precomputed values skip the model
  std::optional<double> ppl_less;
};

struct StereoResult {
  std::vector<StereoPair> pairs;
  double mean_delta = 0.0;
};

// `model` may be null when every input carries precomputed perplexities.
StereoResult stereo_delta(std::span<const StereoInput> inputs, LogprobModel* model,
                          StereoNormalization mode = StereoNormalization::Proportional);
std::vector<StereoInput> read_stereo_pairs(const std::filesystem::path& path);
Json to_json(const StereoResult& r);

struct MetricsOptions {
  bool perplexity_fallback = false;  // decide excluded records by perplexity
  bool perplexity_only = false;      // decide every record by perplexity
};

// Group metrics from parsed selections, optional scores, and (when enabled) a logprob model.
std::array<std::optional<GroupMetrics>, 3> aggregate_metrics(std::span<const ParsedSelection> selections,
                                                             std::span<const ScoreRecord> scores,
                                                             const PromptFile* prompts, LogprobModel* logprobs,
                                                             const MetricsOptions& options = {});

enum class MetricId : uint8_t { Bpr, Toxicity, RegardPositive, RegardNegative, RegardNeutral, RegardOther };
std::string_view to_string(MetricId m);
inline constexpr std::array<MetricId, 6> kAllMetrics = {MetricId::Bpr,           MetricId::Toxicity,
                                                        MetricId::RegardPositive, MetricId::RegardNegative,
                                                        MetricId::RegardNeutral, MetricId::RegardOther};
std::optional<double> metric_value(const GroupMetrics& m, MetricId id);

struct ReductionCell {
  GroupId group = GroupId::Group1;
  MetricId metric = MetricId::Bpr;
  double before = 0.0;
  double after = 0.0;
  double delta = 0.0;                 // after - before
  double reduction = 0.0;             // before - after
  std::optional<double> relative;     // (before - after) / before; nullopt = n/a
  bool operator==(const ReductionCell&) const = default;
};

// Throws MetricMismatch when the two sets disagree on which groups or metrics are present.
std::vector<ReductionCell> reduction_report(const std::array<std::optional<GroupMetrics>, 3>& before,
                                            const std::array<std::optional<GroupMetrics>, 3>& after);
ReductionCell make_reduction_cell(GroupId g, MetricId m, double before, double after);
Json to_json(const ReductionCell& c);
ReductionCell reduction_cell_from_json(const Json& j);

}  // namespace genderpair
