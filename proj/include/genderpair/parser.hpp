#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "genderpair/promptgen.hpp"
#include "genderpair/runner.hpp"

namespace genderpair {

inline constexpr std::string_view kParsedSchema = "genderpair-parsed/1";

enum class Verdict : uint8_t { Biased, AntiBiased, Ambiguous, Unparseable };
enum class MatchMethod : uint8_t { Marked, UnmarkedFallback, None };

std::string_view to_string(Verdict v);
std::string_view to_string(MatchMethod m);
std::optional<Verdict> verdict_from_string(std::string_view s);
std::optional<MatchMethod> match_method_from_string(std::string_view s);

struct ParseOptions {
  bool fallback = true;  // false = strict: only marked spans count
};

struct Selection {
  Verdict verdict = Verdict::Unparseable;
  MatchMethod method = MatchMethod::None;
  std::optional<std::string> matched_span;
};

// Marked spans from a single left-to-right scan. Nested marks yield both the inner and outer span;
// an unclosed mark runs to end of text; a stray close mark is ignored.
std::vector<std::string_view> extract_spans(std::string_view text, Marker marker = {});

Selection parse_text(std::string_view text, std::string_view biased, std::string_view anti_biased,
                     Marker marker = {}, const ParseOptions& options = {});

struct ParsedSelection {
  std::string prompt_id;
  int repetition_index = 0;
  GroupId group = GroupId::Group1;
  int config = 1;
  Verdict verdict = Verdict::Unparseable;
  std::optional<std::string> matched_span;
  MatchMethod method = MatchMethod::None;
  bool response_failed = false;  // the model call itself failed; never parsed

  bool counted() const { return verdict == Verdict::Biased || verdict == Verdict::AntiBiased; }
};

// Throws JoinFailure when the ids differ.
ParsedSelection parse_selection(const ResponseRecord& response, const AssessmentPrompt& prompt,
                                const ParseOptions& options = {});

struct ParseStats {
  size_t total = 0;
  size_t response_failures = 0;
  std::array<size_t, 4> by_verdict{};  // indexed by Verdict
  std::array<size_t, 3> by_method{};   // indexed by MatchMethod

  void add(const ParsedSelection& s);
  size_t count(Verdict v) const { return by_verdict[static_cast<size_t>(v)]; }
  size_t count(MatchMethod m) const { return by_method[static_cast<size_t>(m)]; }
  double fraction(Verdict v) const;
  double fraction(MatchMethod m) const;
  bool operator==(const ParseStats&) const = default;
};

Json to_json(const ParseStats& s);
ParseStats parse_stats_from_json(const Json& j);

struct ParseResult {
  std::vector<ParsedSelection> selections;  // sorted by (prompt_id, repetition_index)
  ParseStats stats;
};

ParseResult parse_run(const RunLog& run, const PromptFile& prompts, const ParseOptions& options = {});

Json to_json(const ParsedSelection& s);
ParsedSelection parsed_from_json(const Json& j);

struct ParsedFile {
  Json header;
  RunManifest run_manifest;
  std::vector<ParsedSelection> selections;
};

void write_parsed(const std::filesystem::path& path, const ParseResult& result, const RunManifest& run,
                  const ParseOptions& options);
ParsedFile read_parsed(const std::filesystem::path& path);

}  // namespace genderpair
