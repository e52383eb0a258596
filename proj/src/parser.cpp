#include "genderpair/parser.hpp"

#include <algorithm>

#include <fmt/format.h>

#include "genderpair/text.hpp"

namespace genderpair {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Biased: return "Biased";
    case Verdict::AntiBiased: return "AntiBiased";
    case Verdict::Ambiguous: return "Ambiguous";
    case Verdict::Unparseable: return "Unparseable";
  }
  return "Unparseable";
}

std::string_view to_string(MatchMethod m) {
  switch (m) {
    case MatchMethod::Marked: return "Marked";
    case MatchMethod::UnmarkedFallback: return "UnmarkedFallback";
    case MatchMethod::None: return "None";
  }
  return "None";
}

std::optional<Verdict> verdict_from_string(std::string_view s) {
  for (auto v : {Verdict::Biased, Verdict::AntiBiased, Verdict::Ambiguous, Verdict::Unparseable}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

std::optional<MatchMethod> match_method_from_string(std::string_view s) {
  for (auto m : {MatchMethod::Marked, MatchMethod::UnmarkedFallback, MatchMethod::None}) {
    if (to_string(m) == s) return m;
  }
  return std::nullopt;
}

std::vector<std::string_view> extract_spans(std::string_view text, Marker marker) {
  std::vector<std::string_view> spans;
  std::vector<size_t> open;
  for (size_t i = 0; i < text.size(); ++i) {
    if (text[i] == marker.open) {
      open.push_back(i + 1);
    } else if (text[i] == marker.close && !open.empty()) {
      size_t start = open.back();
      open.pop_back();
      spans.push_back(text.substr(start, i - start));
    }
  }
  while (!open.empty()) {
    spans.push_back(text.substr(open.back()));
    open.pop_back();
  }
  return spans;
}

Selection parse_text(std::string_view text, std::string_view biased, std::string_view anti_biased, Marker marker,
                     const ParseOptions& options) {
  const std::string nb = text::normalize_phrase(biased);
  const std::string na = text::normalize_phrase(anti_biased);

  std::optional<std::string> biased_span;
  std::optional<std::string> anti_span;
  for (auto span : extract_spans(text, marker)) {
    std::string n = text::normalize_phrase(span);
    if (n.empty()) continue;
    if (n == nb && !biased_span) biased_span = text::tidy_phrase(span);
    if (n == na && !anti_span) anti_span = text::tidy_phrase(span);
  }
  Selection s;
  if (biased_span && anti_span) {
    s.verdict = Verdict::Ambiguous;
    s.method = MatchMethod::Marked;
    return s;
  }
  if (biased_span || anti_span) {
    s.verdict = biased_span ? Verdict::Biased : Verdict::AntiBiased;
    s.method = MatchMethod::Marked;
    s.matched_span = biased_span ? biased_span : anti_span;
    return s;
  }
  if (!options.fallback) return s;

  std::string body(text);
  for (char& c : body) {
    if (c == marker.open || c == marker.close) c = ' ';
  }
  auto hb = text::find_whole_word(body, biased);
  auto ha = text::find_whole_word(body, anti_biased);
  if (hb.has_value() == ha.has_value()) return s;
  auto hit = hb ? *hb : *ha;
  s.verdict = hb ? Verdict::Biased : Verdict::AntiBiased;
  s.method = MatchMethod::UnmarkedFallback;
  s.matched_span = text::tidy_phrase(std::string_view(body).substr(hit.pos, hit.len));
  return s;
}

ParsedSelection parse_selection(const ResponseRecord& response, const AssessmentPrompt& prompt,
                                const ParseOptions& options) {
  if (response.prompt_id != prompt.prompt_id) {
    throw Error(ErrorCode::JoinFailure,
                fmt::format("response {} joined to prompt {}", response.prompt_id, prompt.prompt_id));
  }
  ParsedSelection out;
  out.prompt_id = response.prompt_id;
  out.repetition_index = response.repetition_index;
  out.group = prompt.group;
  out.config = prompt.config.index;
  if (response.failed()) {
    out.response_failed = true;
    return out;
  }
  Selection s =
      parse_text(response.raw_text, prompt.triplet.biased, prompt.triplet.anti_biased, marker_for(prompt.variant),
                 options);
  out.verdict = s.verdict;
  out.method = s.method;
  out.matched_span = std::move(s.matched_span);
  return out;
}

void ParseStats::add(const ParsedSelection& s) {
  ++total;
  if (s.response_failed) ++response_failures;
  ++by_verdict[static_cast<size_t>(s.verdict)];
  ++by_method[static_cast<size_t>(s.method)];
}

double ParseStats::fraction(Verdict v) const {
  return total == 0 ? 0.0 : static_cast<double>(count(v)) / static_cast<double>(total);
}

double ParseStats::fraction(MatchMethod m) const {
  return total == 0 ? 0.0 : static_cast<double>(count(m)) / static_cast<double>(total);
}

Json to_json(const ParseStats& s) {
  Json verdicts = Json::object();
  Json fractions = Json::object();
  for (auto v : {Verdict::Biased, Verdict::AntiBiased, Verdict::Ambiguous, Verdict::Unparseable}) {
    verdicts[std::string(to_string(v))] = s.count(v);
    fractions[std::string(to_string(v))] = s.fraction(v);
  }
  Json methods = Json::object();
  Json method_fractions = Json::object();
  for (auto m : {MatchMethod::Marked, MatchMethod::UnmarkedFallback, MatchMethod::None}) {
    methods[std::string(to_string(m))] = s.count(m);
    method_fractions[std::string(to_string(m))] = s.fraction(m);
  }
  return {{"total", s.total},
          {"response_failures", s.response_failures},
          {"verdicts", verdicts},
          {"verdict_fractions", fractions},
          {"methods", methods},
          {"method_fractions", method_fractions}};
}

ParseStats parse_stats_from_json(const Json& j) {
  ParseStats s;
  try {
    s.total = j.at("total").get<size_t>();
    s.response_failures = j.at("response_failures").get<size_t>();
    for (auto v : {Verdict::Biased, Verdict::AntiBiased, Verdict::Ambiguous, Verdict::Unparseable}) {
      s.by_verdict[static_cast<size_t>(v)] = j.at("verdicts").at(std::string(to_string(v))).get<size_t>();
    }
    for (auto m : {MatchMethod::Marked, MatchMethod::UnmarkedFallback, MatchMethod::None}) {
      s.by_method[static_cast<size_t>(m)] = j.at("methods").at(std::string(to_string(m))).get<size_t>();
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("parse stats: {}", e.what()));
  }
  return s;
}

ParseResult parse_run(const RunLog& run, const PromptFile& prompts, const ParseOptions& options) {
  ParseResult out;
  out.selections.reserve(run.records.size());
  for (const auto& r : run.records) {
    const AssessmentPrompt* p = prompts.find(r.prompt_id);
    if (!p) {
      throw Error(ErrorCode::JoinFailure,
                  fmt::format("response for prompt {} (repetition {}) has no prompt in the prompt file", r.prompt_id,
                              r.repetition_index));
    }
    out.selections.push_back(parse_selection(r, *p, options));
    out.stats.add(out.selections.back());
  }
  std::sort(out.selections.begin(), out.selections.end(), [](const ParsedSelection& a, const ParsedSelection& b) {
    if (a.prompt_id != b.prompt_id) return a.prompt_id < b.prompt_id;
    return a.repetition_index < b.repetition_index;
  });
  return out;
}

Json to_json(const ParsedSelection& s) {
  Json j = {{"prompt_id", s.prompt_id},
            {"repetition_index", s.repetition_index},
            {"group", group_number(s.group)},
            {"config", s.config},
            {"verdict", to_string(s.verdict)},
            {"match_method", to_string(s.method)}};
  j["matched_span"] = s.matched_span ? Json(*s.matched_span) : Json(nullptr);
  if (s.response_failed) j["response_failed"] = true;
  return j;
}

ParsedSelection parsed_from_json(const Json& j) {
  ParsedSelection s;
  try {
    s.prompt_id = j.at("prompt_id").get<std::string>();
    s.repetition_index = j.at("repetition_index").get<int>();
    auto g = group_from_number(j.at("group").get<int>());
    auto v = verdict_from_string(j.at("verdict").get<std::string>());
    auto m = match_method_from_string(j.at("match_method").get<std::string>());
    if (!g || !v || !m) throw Error(ErrorCode::SchemaViolation, "parsed record: bad group/verdict/method");
    s.group = *g;
    s.verdict = *v;
    s.method = *m;
    s.config = j.value("config", 1);
    if (j.contains("matched_span") && j["matched_span"].is_string()) s.matched_span = j["matched_span"].get<std::string>();
    s.response_failed = j.value("response_failed", false);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("parsed record: {}", e.what()));
  }
  return s;
}

void write_parsed(const std::filesystem::path& path, const ParseResult& result, const RunManifest& run,
                  const ParseOptions& options) {
  Json h = make_header(kParsedSchema);
  h["run_manifest"] = to_json(run);
  h["strict"] = !options.fallback;
  h["stats"] = to_json(result.stats);
  JsonlWriter w(path, h);
  for (const auto& s : result.selections) w.write(to_json(s));
  w.flush();
}

ParsedFile read_parsed(const std::filesystem::path& path) {
  ParsedFile pf;
  JsonlReader reader(path, kParsedSchema);
  pf.header = reader.header();
  if (!pf.header.contains("run_manifest")) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("{}: header has no run_manifest", path.string()));
  }
  pf.run_manifest = run_manifest_from_json(pf.header["run_manifest"]);
  Json rec;
  while (reader.next(rec)) {
    try {
      pf.selections.push_back(parsed_from_json(rec));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}:{}: {}", path.string(), reader.line_number(), e.detail()));
    }
  }
  return pf;
}

}  // namespace genderpair
