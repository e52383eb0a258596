#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "genderpair/jsonl.hpp"

namespace genderpair {

inline constexpr std::string_view kRegistrySchema = "genderpair-registry/1";

// Group numbering distinguishes identities only; no ordering semantics beyond a stable sort key.
enum class GroupId : uint8_t { Group1 = 1, Group2 = 2, Group3 = 3 };
inline constexpr std::array<GroupId, 3> kAllGroups = {GroupId::Group1, GroupId::Group2, GroupId::Group3};

inline int group_number(GroupId g) { return static_cast<int>(g); }
inline size_t group_index(GroupId g) { return static_cast<size_t>(g) - 1; }
std::optional<GroupId> group_from_number(int n);

enum class TargetKind : uint8_t { Identity, Title, Pronoun, Name };
enum class TitleCategory : uint8_t { Family, Relationship, Official, Misc };
enum class PronounType : uint8_t { Nominative, Accusative, Attributive, Predicative, Reflexive };
enum class DescriptorSource : uint8_t { Media, Occupation, Literature, Counterfactual };
// Benchmark-tier targets enter the assessment prompts; extended-tier names only feed the debias expansion.
enum class Tier : uint8_t { Benchmark, Extended };

std::string_view to_string(TargetKind k);
std::string_view to_string(TitleCategory c);
std::string_view to_string(PronounType p);
std::string_view to_string(DescriptorSource s);
std::string_view to_string(Tier t);
std::optional<TargetKind> target_kind_from_string(std::string_view s);
std::optional<DescriptorSource> descriptor_source_from_string(std::string_view s);

struct GenderTarget {
  GroupId group = GroupId::Group1;
  TargetKind kind = TargetKind::Identity;
  std::string surface;
  std::optional<TitleCategory> title_category;
  std::optional<PronounType> pronoun_type;
  std::optional<int> rank;  // popularity rank, required for names
  Tier tier = Tier::Benchmark;
  std::string note;

  bool operator==(const GenderTarget&) const = default;
};

struct DescriptorTriplet {
  GroupId group = GroupId::Group1;
  std::string biased;
  std::string anti_biased;
  DescriptorSource source = DescriptorSource::Media;
  int rank = 1;  // frequency rank within source

  bool operator==(const DescriptorTriplet&) const = default;
};

struct GroupCounts {
  size_t identities = 0;
  size_t titles = 0;
  size_t pronouns = 0;
  size_t names = 0;
  size_t biased_descriptors = 0;       // distinct biased words
  size_t anti_biased_descriptors = 0;  // distinct anti-biased words
  size_t descriptor_pairs = 0;         // triplet count

  size_t targets() const { return identities + titles + pronouns + names; }
  bool operator==(const GroupCounts&) const = default;
};

struct GroupSummary {
  GroupId group = GroupId::Group1;
  bool present = false;
  GroupCounts counts;
  size_t expected_prompts = 0;
};

struct RegistrySummary {
  std::string version;
  std::array<GroupSummary, 3> groups;

  size_t total_targets() const;
  size_t total_expected_prompts() const;
};

// Immutable after construction; safe to share across threads.
class GenderTargetRegistry {
 public:
  static GenderTargetRegistry load(const std::filesystem::path& path);
  static GenderTargetRegistry from_json(const Json& doc, std::string_view origin = "<registry>");

  const std::string& version() const { return version_; }
  bool has_group(GroupId g) const { return present_[group_index(g)]; }
  const std::string& description(GroupId g) const { return descriptions_[group_index(g)]; }
  std::vector<GroupId> groups() const;

  // Benchmark-tier targets in canonical order: identities, titles, pronouns (file order), names by rank.
  std::span<const GenderTarget> benchmark_targets(GroupId g) const;
  // All targets of a group, benchmark tier first, then extended names by rank.
  std::span<const GenderTarget> all_targets(GroupId g) const { return targets_[group_index(g)]; }
  // Triplets in canonical order: by source, then rank.
  std::span<const DescriptorTriplet> triplets(GroupId g) const { return triplets_[group_index(g)]; }

  // Names of the group (any tier) ordered by rank.
  std::vector<GenderTarget> ranked_names(GroupId g) const;

  GroupCounts counts(GroupId g) const;
  std::optional<GroupCounts> declared_counts(GroupId g) const { return declared_[group_index(g)]; }

  Json to_json() const;

 private:
  std::string version_;
  std::array<bool, 3> present_{};
  std::array<std::string, 3> descriptions_;
  std::array<std::vector<GenderTarget>, 3> targets_;
  std::array<size_t, 3> benchmark_count_{};
  std::array<std::vector<DescriptorTriplet>, 3> triplets_;
  std::array<std::optional<GroupCounts>, 3> declared_;
};

inline constexpr size_t kConfigurationsPerPair = 6;

RegistrySummary summarize(const GenderTargetRegistry& registry);

struct RegistryWarning {
  std::optional<GroupId> group;
  std::string message;
};

// Group-parity checks: biased vs anti-biased counts within a group, descriptor counts across groups,
// and groups absent from the registry.
std::vector<RegistryWarning> validate_parity(const GenderTargetRegistry& registry);

// Consistency checks that do not block loading: an anti-biased word that is also a biased word of
// the same group, or a descriptor identical to one of the group's target surfaces.
std::vector<RegistryWarning> consistency_warnings(const GenderTargetRegistry& registry);

Json to_json(const GenderTarget& t);
GenderTarget target_from_json(const Json& j, std::string_view where = "target");
Json to_json(const DescriptorTriplet& t);
DescriptorTriplet triplet_from_json(const Json& j, std::string_view where = "triplet");
Json to_json(const RegistrySummary& s);

}  // namespace genderpair
