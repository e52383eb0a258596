#include "genderpair/registry.hpp"

#include <algorithm>
#include <map>
#include <set>

#include <fmt/format.h>

#include "genderpair/error.hpp"
#include "genderpair/text.hpp"

namespace genderpair {
namespace {

template <typename Enum, size_t N>
std::optional<Enum> lookup(std::string_view s, const std::array<std::pair<std::string_view, Enum>, N>& table) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  return std::nullopt;
}

constexpr std::array<std::pair<std::string_view, TargetKind>, 4> kKinds = {{
    {"identity", TargetKind::Identity},
    {"title", TargetKind::Title},
    {"pronoun", TargetKind::Pronoun},
    {"name", TargetKind::Name},
}};
constexpr std::array<std::pair<std::string_view, TitleCategory>, 4> kTitleCategories = {{
    {"family", TitleCategory::Family},
    {"relationship", TitleCategory::Relationship},
    {"official", TitleCategory::Official},
    {"misc", TitleCategory::Misc},
}};
constexpr std::array<std::pair<std::string_view, PronounType>, 5> kPronounTypes = {{
    {"nominative", PronounType::Nominative},
    {"accusative", PronounType::Accusative},
    {"attributive", PronounType::Attributive},
    {"predicative", PronounType::Predicative},
    {"reflexive", PronounType::Reflexive},
}};
constexpr std::array<std::pair<std::string_view, DescriptorSource>, 4> kSources = {{
    {"media", DescriptorSource::Media},
    {"occupation", DescriptorSource::Occupation},
    {"literature", DescriptorSource::Literature},
    {"counterfactual", DescriptorSource::Counterfactual},
}};
constexpr std::array<std::pair<std::string_view, Tier>, 2> kTiers = {{
    {"benchmark", Tier::Benchmark},
    {"extended", Tier::Extended},
}};

template <typename Enum, size_t N>
std::string_view name_of(Enum v, const std::array<std::pair<std::string_view, Enum>, N>& table) {
  for (const auto& [name, value] : table) {
    if (value == v) return name;
  }
  return "?";
}

[[noreturn]] void violation(std::string_view where, std::string_view what) {
  throw Error(ErrorCode::SchemaViolation, fmt::format("{}: {}", where, what));
}

std::string require_string(const Json& obj, const char* key, std::string_view where) {
  if (!obj.contains(key) || !obj[key].is_string()) violation(where, fmt::format("missing string field \"{}\"", key));
  return obj[key].get<std::string>();
}

int require_int(const Json& obj, const char* key, std::string_view where) {
  if (!obj.contains(key) || !obj[key].is_number_integer()) {
    violation(where, fmt::format("missing integer field \"{}\"", key));
  }
  return obj[key].get<int>();
}

GroupId require_group(const Json& obj, std::string_view where) {
  int n = require_int(obj, "group", where);
  auto g = group_from_number(n);
  if (!g) violation(where, fmt::format("group must be 1, 2 or 3 (got {})", n));
  return *g;
}

void check_surface(std::string_view value, std::string_view field, std::string_view where) {
  if (value.empty()) violation(where, fmt::format("{} is empty", field));
  if (text::trim_whitespace(value).size() != value.size()) violation(where, fmt::format("{} is not trimmed", field));
  if (text::contains_brace(value)) {
    throw Error(ErrorCode::BraceInSurface, fmt::format("{}: {} \"{}\" contains a brace", where, field, value));
  }
}

int kind_order(TargetKind k) { return static_cast<int>(k); }

}  // namespace

std::optional<GroupId> group_from_number(int n) {
  if (n < 1 || n > 3) return std::nullopt;
  return static_cast<GroupId>(n);
}

std::string_view to_string(TargetKind k) { return name_of(k, kKinds); }
std::string_view to_string(TitleCategory c) { return name_of(c, kTitleCategories); }
std::string_view to_string(PronounType p) { return name_of(p, kPronounTypes); }
std::string_view to_string(DescriptorSource s) { return name_of(s, kSources); }
std::string_view to_string(Tier t) { return name_of(t, kTiers); }
std::optional<TargetKind> target_kind_from_string(std::string_view s) { return lookup(s, kKinds); }
std::optional<DescriptorSource> descriptor_source_from_string(std::string_view s) { return lookup(s, kSources); }

Json to_json(const GenderTarget& t) {
  Json j = {{"group", group_number(t.group)}, {"kind", to_string(t.kind)}, {"surface", t.surface}};
  if (t.title_category) j["title_category"] = to_string(*t.title_category);
  if (t.pronoun_type) j["pronoun_type"] = to_string(*t.pronoun_type);
  if (t.rank) j["rank"] = *t.rank;
  if (t.tier != Tier::Benchmark) j["tier"] = to_string(t.tier);
  if (!t.note.empty()) j["note"] = t.note;
  return j;
}

Json to_json(const DescriptorTriplet& t) {
  return {{"group", group_number(t.group)},
          {"biased", t.biased},
          {"anti_biased", t.anti_biased},
          {"source", to_string(t.source)},
          {"rank", t.rank}};
}

GenderTarget target_from_json(const Json& j, std::string_view where) {
  if (!j.is_object()) violation(where, "target must be an object");
  GenderTarget t;
  t.group = require_group(j, where);
  auto kind = lookup(require_string(j, "kind", where), kKinds);
  if (!kind) violation(where, "kind must be identity|title|pronoun|name");
  t.kind = *kind;
  t.surface = require_string(j, "surface", where);
  check_surface(t.surface, "surface", where);

  if (j.contains("title_category")) {
    auto c = lookup(require_string(j, "title_category", where), kTitleCategories);
    if (!c) violation(where, "title_category must be family|relationship|official|misc");
    t.title_category = *c;
  }
  if (j.contains("pronoun_type")) {
    auto p = lookup(require_string(j, "pronoun_type", where), kPronounTypes);
    if (!p) violation(where, "pronoun_type must be nominative|accusative|attributive|predicative|reflexive");
    t.pronoun_type = *p;
  }
  if (t.title_category.has_value() != (t.kind == TargetKind::Title)) {
    violation(where, "title_category is required for titles and forbidden otherwise");
  }
  if (t.pronoun_type.has_value() != (t.kind == TargetKind::Pronoun)) {
    violation(where, "pronoun_type is required for pronouns and forbidden otherwise");
  }
  if (j.contains("rank")) {
    int r = require_int(j, "rank", where);
    if (r < 1) violation(where, "rank must be a positive integer");
    t.rank = r;
  }
  if (t.kind == TargetKind::Name && !t.rank) violation(where, "names require a rank");
  if (j.contains("tier")) {
    auto tier = lookup(require_string(j, "tier", where), kTiers);
    if (!tier) violation(where, "tier must be benchmark|extended");
    t.tier = *tier;
  }
  if (t.tier == Tier::Extended && t.kind != TargetKind::Name) violation(where, "only names may use the extended tier");
  if (j.contains("note")) t.note = require_string(j, "note", where);
  return t;
}

DescriptorTriplet triplet_from_json(const Json& j, std::string_view where) {
  if (!j.is_object()) violation(where, "triplet must be an object");
  DescriptorTriplet t;
  t.group = require_group(j, where);
  t.biased = require_string(j, "biased", where);
  t.anti_biased = require_string(j, "anti_biased", where);
  check_surface(t.biased, "biased", where);
  check_surface(t.anti_biased, "anti_biased", where);
  if (text::normalize_phrase(t.biased) == text::normalize_phrase(t.anti_biased)) {
    violation(where, fmt::format("biased and anti_biased are the same descriptor (\"{}\")", t.biased));
  }
  auto src = lookup(require_string(j, "source", where), kSources);
  if (!src) violation(where, "source must be media|occupation|literature|counterfactual");
  t.source = *src;
  t.rank = require_int(j, "rank", where);
  if (t.rank < 1) violation(where, "rank must be a positive integer");
  return t;
}

GenderTargetRegistry GenderTargetRegistry::load(const std::filesystem::path& path) {
  std::string body = read_text_file(path);
  Json doc = Json::parse(body, nullptr, false);
  if (doc.is_discarded()) violation(path.string(), "not valid JSON");
  return from_json(doc, path.string());
}

GenderTargetRegistry GenderTargetRegistry::from_json(const Json& doc, std::string_view origin) {
  if (!doc.is_object()) violation(origin, "registry document must be an object");
  if (require_string(doc, "schema", origin) != kRegistrySchema) {
    violation(origin, fmt::format("schema must be \"{}\"", kRegistrySchema));
  }
  GenderTargetRegistry reg;
  reg.version_ = require_string(doc, "version", origin);
  if (reg.version_.empty()) violation(origin, "version is empty");

  if (!doc.contains("targets") || !doc["targets"].is_array()) violation(origin, "missing array \"targets\"");
  if (!doc.contains("triplets") || !doc["triplets"].is_array()) violation(origin, "missing array \"triplets\"");
  if (!doc.contains("manifest") || !doc["manifest"].is_object() || !doc["manifest"].contains("groups") ||
      !doc["manifest"]["groups"].is_object()) {
    violation(origin, "missing manifest.groups object");
  }

  std::set<std::tuple<int, int, std::string>> seen_targets;
  std::set<std::pair<int, int>> seen_name_ranks;
  std::array<std::vector<std::pair<size_t, GenderTarget>>, 3> staged;
  const auto& targets = doc["targets"];
  for (size_t i = 0; i < targets.size(); ++i) {
    std::string where = fmt::format("{}: targets[{}]", origin, i);
    GenderTarget t = target_from_json(targets[i], where);
    auto key = std::make_tuple(group_number(t.group), kind_order(t.kind), text::casefold(t.surface));
    if (!seen_targets.insert(key).second) violation(where, fmt::format("duplicate target \"{}\"", t.surface));
    if (t.kind == TargetKind::Name && !seen_name_ranks.insert({group_number(t.group), *t.rank}).second) {
      violation(where, fmt::format("duplicate name rank {}", *t.rank));
    }
    reg.present_[group_index(t.group)] = true;
    staged[group_index(t.group)].emplace_back(i, std::move(t));
  }

  std::set<std::tuple<int, std::string, std::string>> seen_pairs;
  std::set<std::tuple<int, int, int>> seen_ranks;
  const auto& triplets = doc["triplets"];
  for (size_t i = 0; i < triplets.size(); ++i) {
    std::string where = fmt::format("{}: triplets[{}]", origin, i);
    DescriptorTriplet t = triplet_from_json(triplets[i], where);
    auto key = std::make_tuple(group_number(t.group), text::normalize_phrase(t.biased),
                               text::normalize_phrase(t.anti_biased));
    if (!seen_pairs.insert(key).second) {
      throw Error(ErrorCode::DuplicateTriplet,
                  fmt::format("{}: pair ({}, {}) already present in group {}", where, t.biased, t.anti_biased,
                              group_number(t.group)));
    }
    if (!seen_ranks.insert({group_number(t.group), static_cast<int>(t.source), t.rank}).second) {
      violation(where, fmt::format("duplicate rank {} within source {}", t.rank, to_string(t.source)));
    }
    reg.present_[group_index(t.group)] = true;
    reg.triplets_[group_index(t.group)].push_back(std::move(t));
  }

  for (GroupId g : kAllGroups) {
    size_t gi = group_index(g);
    auto& st = staged[gi];
    std::stable_sort(st.begin(), st.end(), [](const auto& a, const auto& b) {
      const GenderTarget& x = a.second;
      const GenderTarget& y = b.second;
      if (x.tier != y.tier) return x.tier < y.tier;
      if (x.kind != y.kind) return kind_order(x.kind) < kind_order(y.kind);
      if (x.kind == TargetKind::Name) return *x.rank < *y.rank;
      return a.first < b.first;
    });
    for (auto& [idx, t] : st) {
      if (t.tier == Tier::Benchmark) ++reg.benchmark_count_[gi];
      reg.targets_[gi].push_back(std::move(t));
    }
    std::stable_sort(reg.triplets_[gi].begin(), reg.triplets_[gi].end(),
                     [](const DescriptorTriplet& a, const DescriptorTriplet& b) {
                       if (a.source != b.source) return a.source < b.source;
                       return a.rank < b.rank;
                     });
  }

  const auto& mgroups = doc["manifest"]["groups"];
  for (auto it = mgroups.begin(); it != mgroups.end(); ++it) {
    std::string where = fmt::format("{}: manifest.groups[\"{}\"]", origin, it.key());
    int n = 0;
    try {
      n = std::stoi(it.key());
    } catch (...) {
      violation(where, "group key must be 1, 2 or 3");
    }
    auto g = group_from_number(n);
    if (!g || std::to_string(n) != it.key()) violation(where, "group key must be 1, 2 or 3");
    const Json& m = it.value();
    if (!m.is_object()) violation(where, "must be an object");
    GroupCounts declared;
    declared.identities = static_cast<size_t>(require_int(m, "identities", where));
    declared.titles = static_cast<size_t>(require_int(m, "titles", where));
    declared.pronouns = static_cast<size_t>(require_int(m, "pronouns", where));
    declared.names = static_cast<size_t>(require_int(m, "names", where));
    declared.biased_descriptors = static_cast<size_t>(require_int(m, "biased_descriptors", where));
    declared.anti_biased_descriptors = static_cast<size_t>(require_int(m, "anti_biased_descriptors", where));
    declared.descriptor_pairs = static_cast<size_t>(require_int(m, "descriptor_pairs", where));
    if (m.contains("description")) reg.descriptions_[group_index(*g)] = require_string(m, "description", where);
    reg.declared_[group_index(*g)] = declared;
    reg.present_[group_index(*g)] = true;
  }

  for (GroupId g : kAllGroups) {
    if (!reg.has_group(g)) continue;
    std::string where = fmt::format("{}: group {}", origin, group_number(g));
    auto declared = reg.declared_[group_index(g)];
    if (!declared) violation(where, "group has records but no manifest entry");
    GroupCounts actual = reg.counts(g);
    auto check = [&](const char* field, size_t want, size_t got) {
      if (want != got) violation(where, fmt::format("manifest declares {} {} but the file has {}", want, field, got));
    };
    check("identities", declared->identities, actual.identities);
    check("titles", declared->titles, actual.titles);
    check("pronouns", declared->pronouns, actual.pronouns);
    check("names", declared->names, actual.names);
    check("biased_descriptors", declared->biased_descriptors, actual.biased_descriptors);
    check("anti_biased_descriptors", declared->anti_biased_descriptors, actual.anti_biased_descriptors);
    check("descriptor_pairs", declared->descriptor_pairs, actual.descriptor_pairs);
  }
  return reg;
}

std::vector<GroupId> GenderTargetRegistry::groups() const {
  std::vector<GroupId> out;
  for (GroupId g : kAllGroups) {
    if (has_group(g)) out.push_back(g);
  }
  return out;
}

std::span<const GenderTarget> GenderTargetRegistry::benchmark_targets(GroupId g) const {
  size_t gi = group_index(g);
  return std::span<const GenderTarget>(targets_[gi]).first(benchmark_count_[gi]);
}

std::vector<GenderTarget> GenderTargetRegistry::ranked_names(GroupId g) const {
  std::vector<GenderTarget> names;
  for (const auto& t : targets_[group_index(g)]) {
    if (t.kind == TargetKind::Name) names.push_back(t);
  }
  std::stable_sort(names.begin(), names.end(), [](const auto& a, const auto& b) { return *a.rank < *b.rank; });
  return names;
}

GroupCounts GenderTargetRegistry::counts(GroupId g) const {
  GroupCounts c;
  for (const auto& t : benchmark_targets(g)) {
    switch (t.kind) {
      case TargetKind::Identity: ++c.identities; break;
      case TargetKind::Title: ++c.titles; break;
      case TargetKind::Pronoun: ++c.pronouns; break;
      case TargetKind::Name: ++c.names; break;
    }
  }
  std::set<std::string> biased;
  std::set<std::string> anti;
  for (const auto& t : triplets(g)) {
    biased.insert(text::normalize_phrase(t.biased));
    anti.insert(text::normalize_phrase(t.anti_biased));
  }
  c.biased_descriptors = biased.size();
  c.anti_biased_descriptors = anti.size();
  c.descriptor_pairs = triplets(g).size();
  return c;
}

Json GenderTargetRegistry::to_json() const {
  Json doc = {{"schema", kRegistrySchema}, {"version", version_}};
  Json groups = Json::object();
  Json targets = Json::array();
  Json triplets = Json::array();
  for (GroupId g : kAllGroups) {
    if (!has_group(g)) continue;
    GroupCounts c = counts(g);
    Json m = {{"identities", c.identities},
              {"titles", c.titles},
              {"pronouns", c.pronouns},
              {"names", c.names},
              {"biased_descriptors", c.biased_descriptors},
              {"anti_biased_descriptors", c.anti_biased_descriptors},
              {"descriptor_pairs", c.descriptor_pairs}};
    if (!description(g).empty()) m["description"] = description(g);
    groups[std::to_string(group_number(g))] = m;
    for (const auto& t : all_targets(g)) targets.push_back(genderpair::to_json(t));
    for (const auto& t : this->triplets(g)) triplets.push_back(genderpair::to_json(t));
  }
  doc["manifest"] = {{"groups", groups}};
  doc["targets"] = targets;
  doc["triplets"] = triplets;
  return doc;
}

size_t RegistrySummary::total_targets() const {
  size_t n = 0;
  for (const auto& g : groups) n += g.counts.targets();
  return n;
}

size_t RegistrySummary::total_expected_prompts() const {
  size_t n = 0;
  for (const auto& g : groups) n += g.expected_prompts;
  return n;
}

RegistrySummary summarize(const GenderTargetRegistry& registry) {
  RegistrySummary s;
  s.version = registry.version();
  for (GroupId g : kAllGroups) {
    auto& gs = s.groups[group_index(g)];
    gs.group = g;
    gs.present = registry.has_group(g);
    if (!gs.present) continue;
    gs.counts = registry.counts(g);
    gs.expected_prompts = gs.counts.targets() * gs.counts.descriptor_pairs * kConfigurationsPerPair;
  }
  return s;
}

std::vector<RegistryWarning> validate_parity(const GenderTargetRegistry& registry) {
  std::vector<RegistryWarning> out;
  std::map<size_t, std::vector<GroupId>> by_pairs;
  for (GroupId g : kAllGroups) {
    if (!registry.has_group(g)) {
      out.push_back({g, fmt::format("group {} is absent; cross-group parity cannot hold", group_number(g))});
      continue;
    }
    GroupCounts c = registry.counts(g);
    if (c.biased_descriptors != c.anti_biased_descriptors) {
      out.push_back({g, fmt::format("group {} has {} biased but {} anti-biased descriptors", group_number(g),
                                    c.biased_descriptors, c.anti_biased_descriptors)});
    }
    by_pairs[c.descriptor_pairs].push_back(g);
  }
  if (by_pairs.size() > 1) {
    std::string detail;
    for (const auto& [n, gs] : by_pairs) {
      for (GroupId g : gs) detail += fmt::format(" group {}={}", group_number(g), n);
    }
    out.push_back({std::nullopt, "descriptor pair counts differ across groups:" + detail});
  }
  return out;
}

std::vector<RegistryWarning> consistency_warnings(const GenderTargetRegistry& registry) {
  std::vector<RegistryWarning> out;
  for (GroupId g : registry.groups()) {
    std::set<std::string> biased;
    for (const auto& t : registry.triplets(g)) biased.insert(text::normalize_phrase(t.biased));
    std::set<std::string> reported;
    for (const auto& t : registry.triplets(g)) {
      std::string anti = text::normalize_phrase(t.anti_biased);
      if (biased.count(anti) && reported.insert(anti).second) {
        out.push_back({g, fmt::format("group {}: \"{}\" is both a biased and an anti-biased descriptor",
                                      group_number(g), t.anti_biased)});
      }
    }
    for (const auto& target : registry.all_targets(g)) {
      std::string s = text::normalize_phrase(target.surface);
      for (const auto& t : registry.triplets(g)) {
        if (s == text::normalize_phrase(t.biased) || s == text::normalize_phrase(t.anti_biased)) {
          out.push_back({g, fmt::format("group {}: target \"{}\" is also a descriptor", group_number(g),
                                        target.surface)});
          break;
        }
      }
    }
  }
  return out;
}

Json to_json(const RegistrySummary& s) {
  Json groups = Json::array();
  for (const auto& g : s.groups) {
    if (!g.present) continue;
    groups.push_back({{"group", group_number(g.group)},
                      {"identities", g.counts.identities},
                      {"titles", g.counts.titles},
                      {"pronouns", g.counts.pronouns},
                      {"names", g.counts.names},
                      {"targets", g.counts.targets()},
                      {"biased_descriptors", g.counts.biased_descriptors},
                      {"anti_biased_descriptors", g.counts.anti_biased_descriptors},
                      {"descriptor_pairs", g.counts.descriptor_pairs},
                      {"expected_prompts", g.expected_prompts}});
  }
  return {{"version", s.version},
          {"groups", groups},
          {"total_targets", s.total_targets()},
          {"total_expected_prompts", s.total_expected_prompts()}};
}

}  // namespace genderpair
