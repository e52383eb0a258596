#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "genderpair/registry.hpp"

namespace genderpair {

inline constexpr std::string_view kPromptsSchema = "genderpair-prompts/1";

enum class PairShape : uint8_t {
  AttributeSet,                // configurations 1-2
  PhrasePairsTargetFirst,      // configurations 3-4
  PhrasePairsDescriptorFirst,  // configurations 5-6
};

struct PairConfiguration {
  int index = 1;
  PairShape shape = PairShape::AttributeSet;
  bool biased_first = true;

  // Throws InvalidInput outside 1..6.
  static PairConfiguration from_index(int index);
  bool operator==(const PairConfiguration&) const = default;
};

// Prompt variants for the robustness harness. Type1 is the canonical wording; Type2 rewords the
// instruction; Type3 keeps the Type1 instruction but asks for '[ ]' marks.
enum class PromptVariant : uint8_t { Type1 = 1, Type2 = 2, Type3 = 3 };
std::optional<PromptVariant> prompt_variant_from_number(int n);

struct Marker {
  char open = '{';
  char close = '}';
};
Marker marker_for(PromptVariant v);

struct AssessmentPrompt {
  std::string prompt_id;
  GroupId group = GroupId::Group1;
  GenderTarget target;
  DescriptorTriplet triplet;
  PairConfiguration config;
  PromptVariant variant = PromptVariant::Type1;
  std::string text;

  const std::string& first_descriptor() const { return config.biased_first ? triplet.biased : triplet.anti_biased; }
  const std::string& second_descriptor() const { return config.biased_first ? triplet.anti_biased : triplet.biased; }
};

struct RenderOptions {
  std::string registry_version;
  PromptVariant variant = PromptVariant::Type1;
};

// Throws GroupMismatch when target and triplet belong to different groups.
AssessmentPrompt render_prompt(const GenderTarget& target, const DescriptorTriplet& triplet,
                               const PairConfiguration& config, const RenderOptions& options = {});

// Stable id: pure function of (registry version, target, triplet, configuration, variant).
std::string make_prompt_id(std::string_view registry_version, const GenderTarget& target,
                           const DescriptorTriplet& triplet, const PairConfiguration& config, PromptVariant variant);

struct SampleSpec {
  size_t size = 0;
  uint64_t seed = 0;
};

struct BenchmarkSelection {
  std::vector<GroupId> groups = {GroupId::Group1, GroupId::Group2, GroupId::Group3};
  std::vector<int> configs = {1, 2, 3, 4, 5, 6};
  PromptVariant variant = PromptVariant::Type1;
  std::optional<SampleSpec> sample;  // uniform sample without replacement, order preserved
  std::optional<size_t> limit;       // truncate after this many prompts
};

// Lazily enumerates prompts in the order (group, target, triplet, configuration).
class BenchmarkStream {
 public:
  // Throws EmptySelection for empty group/config subsets (or selected groups absent from the registry).
  BenchmarkStream(const GenderTargetRegistry& registry, BenchmarkSelection selection);

  std::optional<AssessmentPrompt> next();

  // Number of (target, triplet, config) combinations before sampling/limit.
  size_t population() const { return population_; }
  // Number of prompts this stream will emit.
  size_t expected_count() const;

 private:
  bool advance_cursor();
  bool sample_accepts();

  const GenderTargetRegistry* registry_;
  BenchmarkSelection selection_;
  size_t population_ = 0;
  size_t group_pos_ = 0;
  size_t target_pos_ = 0;
  size_t triplet_pos_ = 0;
  size_t config_pos_ = 0;
  bool started_ = false;
  bool done_ = false;
  size_t seen_ = 0;
  size_t emitted_ = 0;
  std::mt19937_64 rng_;
};

// Materialized convenience wrapper over BenchmarkStream.
std::vector<AssessmentPrompt> generate_benchmark(const GenderTargetRegistry& registry,
                                                 const BenchmarkSelection& selection);

// Parses "1-6", "1,3,5", "2-4,6".
std::vector<int> parse_index_list(std::string_view spec, int lo, int hi);

// Lookup of prompts by id over the full benchmark of one variant.
class PromptIndex {
 public:
  PromptIndex(const GenderTargetRegistry& registry, PromptVariant variant = PromptVariant::Type1);
  const AssessmentPrompt* find(std::string_view prompt_id) const;
  size_t size() const { return prompts_.size(); }

 private:
  std::vector<AssessmentPrompt> prompts_;
  std::unordered_map<std::string, size_t> by_id_;
};

Json to_json(const AssessmentPrompt& p);
AssessmentPrompt prompt_from_json(const Json& j);

Json prompts_header(const GenderTargetRegistry& registry, const BenchmarkSelection& selection);

// Writes header + one record per prompt. Returns the number of prompts written.
size_t write_prompts(const std::filesystem::path& path, const Json& header, BenchmarkStream& stream);

struct PromptFile {
  Json header;
  std::vector<AssessmentPrompt> prompts;
  std::unordered_map<std::string, size_t> by_id;

  const AssessmentPrompt* find(std::string_view id) const;
};
PromptFile read_prompts(const std::filesystem::path& path);

}  // namespace genderpair
