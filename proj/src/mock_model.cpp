#include "genderpair/mock_model.hpp"

#include <cmath>
#include <cstring>

#include <fmt/format.h>

#include "genderpair/hash.hpp"
#include "genderpair/text.hpp"

namespace genderpair {
namespace {

uint64_t bucket_hash(const std::string& salt, const std::string& prompt_id, int repetition) {
  std::string h = sha256_hex(fmt::format("{}\x1f{}\x1f{}", salt, prompt_id, repetition));
  return std::stoull(h.substr(0, 15), nullptr, 16);
}

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  size_t pos = 0;
  while ((pos = s.find(from, pos)) != std::string::npos) {
    s.replace(pos, from.size(), to);
    pos += to.size();
  }
}

MockRespond respond_from_string(const std::string& s) {
  if (s == "biased") return MockRespond::Biased;
  if (s == "anti") return MockRespond::Anti;
  if (s == "both") return MockRespond::Both;
  if (s == "none") return MockRespond::None;
  if (s == "unmarked_biased") return MockRespond::UnmarkedBiased;
  if (s == "unmarked_anti") return MockRespond::UnmarkedAnti;
  if (s == "literal") return MockRespond::Literal;
  if (s == "fail") return MockRespond::Fail;
  throw Error(ErrorCode::SchemaViolation, fmt::format("mock script: unknown respond \"{}\"", s));
}

std::string_view respond_to_string(MockRespond r) {
  switch (r) {
    case MockRespond::Biased: return "biased";
    case MockRespond::Anti: return "anti";
    case MockRespond::Both: return "both";
    case MockRespond::None: return "none";
    case MockRespond::UnmarkedBiased: return "unmarked_biased";
    case MockRespond::UnmarkedAnti: return "unmarked_anti";
    case MockRespond::Literal: return "literal";
    case MockRespond::Fail: return "fail";
  }
  return "anti";
}

template <typename T>
std::set<T> set_from(const Json& j, const char* key) {
  std::set<T> out;
  if (j.contains(key)) {
    for (const auto& v : j[key]) out.insert(v.get<T>());
  }
  return out;
}

MockRule rule_from_json(const Json& j) {
  MockRule r;
  if (j.contains("when")) {
    const Json& w = j["when"];
    r.when.groups = set_from<int>(w, "groups");
    r.when.configs = set_from<int>(w, "configs");
    r.when.repetitions = set_from<int>(w, "repetitions");
    r.when.variants = set_from<int>(w, "variants");
    r.when.prompt_ids = set_from<std::string>(w, "prompt_ids");
    if (w.contains("bucket")) {
      const Json& b = w["bucket"];
      MockBucket mb;
      mb.salt = b.value("salt", "");
      mb.modulo = b.value("modulo", uint64_t{100});
      mb.below = b.at("below").get<uint64_t>();
      if (mb.modulo == 0) throw Error(ErrorCode::SchemaViolation, "mock script: bucket modulo 0");
      r.when.bucket = mb;
    }
  }
  r.respond = respond_from_string(j.value("respond", "anti"));
  r.literal = j.value("text", "");
  if (j.contains("error")) {
    auto code = error_code_from_string(j["error"].get<std::string>());
    if (!code) throw Error(ErrorCode::SchemaViolation, "mock script: unknown error code");
    r.error = *code;
  }
  r.fail_attempts = j.value("attempts", -1);
  return r;
}

template <typename T>
Json set_json(const std::set<T>& s) {
  Json a = Json::array();
  for (const auto& v : s) a.push_back(v);
  return a;
}

Json rule_to_json(const MockRule& r) {
  Json w = Json::object();
  if (!r.when.groups.empty()) w["groups"] = set_json(r.when.groups);
  if (!r.when.configs.empty()) w["configs"] = set_json(r.when.configs);
  if (!r.when.repetitions.empty()) w["repetitions"] = set_json(r.when.repetitions);
  if (!r.when.variants.empty()) w["variants"] = set_json(r.when.variants);
  if (!r.when.prompt_ids.empty()) w["prompt_ids"] = set_json(r.when.prompt_ids);
  if (r.when.bucket) {
    w["bucket"] = {{"salt", r.when.bucket->salt}, {"modulo", r.when.bucket->modulo}, {"below", r.when.bucket->below}};
  }
  Json j = {{"when", w}, {"respond", respond_to_string(r.respond)}};
  if (r.respond == MockRespond::Literal) j["text"] = r.literal;
  if (r.respond == MockRespond::Fail) {
    j["error"] = to_string(r.error);
    j["attempts"] = r.fail_attempts;
  }
  return j;
}

}  // namespace

bool MockCondition::matches(const AssessmentPrompt& p, int repetition) const {
  if (!groups.empty() && !groups.count(group_number(p.group))) return false;
  if (!configs.empty() && !configs.count(p.config.index)) return false;
  if (!repetitions.empty() && !repetitions.count(repetition)) return false;
  if (!variants.empty() && !variants.count(static_cast<int>(p.variant))) return false;
  if (!prompt_ids.empty() && !prompt_ids.count(p.prompt_id)) return false;
  if (bucket && bucket_hash(bucket->salt, p.prompt_id, repetition) % bucket->modulo >= bucket->below) return false;
  return true;
}

MockScript MockScript::from_json(const Json& j) {
  if (!j.is_object() || j.value("schema", "") != kMockSchema) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("mock script: schema must be \"{}\"", kMockSchema));
  }
  MockScript s;
  try {
    s.template_text = j.value("template", s.template_text);
    s.none_text = j.value("none_template", s.none_text);
    if (j.contains("rules")) {
      for (const auto& r : j["rules"]) s.rules.push_back(rule_from_json(r));
    }
    if (j.contains("default")) s.fallback = rule_from_json(j["default"]);
    if (j.contains("logprobs")) {
      const Json& lp = j["logprobs"];
      s.default_token_prob = lp.value("default", s.default_token_prob);
      if (lp.contains("tokens")) {
        for (const auto& [k, v] : lp["tokens"].items()) s.token_probs[text::casefold(k)] = v.get<double>();
      }
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("mock script: {}", e.what()));
  }
  auto check_p = [](double p) {
    if (!(p > 0.0 && p <= 1.0)) throw Error(ErrorCode::SchemaViolation, fmt::format("mock script: probability {}", p));
  };
  check_p(s.default_token_prob);
  for (const auto& [k, v] : s.token_probs) check_p(v);
  return s;
}

MockScript MockScript::load(const std::filesystem::path& path) {
  Json j = Json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::SchemaViolation, fmt::format("{}: not valid JSON", path.string()));
  return from_json(j);
}

Json MockScript::to_json() const {
  Json rules_j = Json::array();
  for (const auto& r : rules) rules_j.push_back(rule_to_json(r));
  Json tokens = Json::object();
  for (const auto& [k, v] : token_probs) tokens[k] = v;
  return {{"schema", kMockSchema},
          {"template", template_text},
          {"none_template", none_text},
          {"rules", rules_j},
          {"default", rule_to_json(fallback)},
          {"logprobs", {{"default", default_token_prob}, {"tokens", tokens}}}};
}

MockModel::MockModel(MockScript script) : script_(std::move(script)) {
  id_ = "mock:" + sha256_hex(script_.to_json().dump()).substr(0, 16);
}

const MockRule& MockModel::rule_for(const AssessmentPrompt& prompt, int repetition) const {
  for (const auto& r : script_.rules) {
    if (r.when.matches(prompt, repetition)) return r;
  }
  return script_.fallback;
}

std::string MockModel::render(const AssessmentPrompt& prompt, int repetition) const {
  return render_rule(rule_for(prompt, repetition), prompt);
}

std::string MockModel::render_rule(const MockRule& rule, const AssessmentPrompt& prompt) const {
  Marker m = marker_for(prompt.variant);
  auto mark = [&](const std::string& s) { return std::string(1, m.open) + s + std::string(1, m.close); };
  const std::string& b = prompt.triplet.biased;
  const std::string& a = prompt.triplet.anti_biased;
  std::string out;
  std::string chosen;
  switch (rule.respond) {
    case MockRespond::Biased: chosen = mark(b); break;
    case MockRespond::Anti: chosen = mark(a); break;
    case MockRespond::Both: chosen = mark(b) + " and " + mark(a); break;
    case MockRespond::UnmarkedBiased: chosen = b; break;
    case MockRespond::UnmarkedAnti: chosen = a; break;
    case MockRespond::None:
      out = script_.none_text;
      replace_all(out, "%T", prompt.target.surface);
      return out;
    case MockRespond::Literal:
      out = rule.literal;
      replace_all(out, "%T", prompt.target.surface);
      replace_all(out, "%B", b);
      replace_all(out, "%A", a);
      replace_all(out, "%O", std::string(1, m.open));
      replace_all(out, "%C", std::string(1, m.close));
      return out;
    case MockRespond::Fail: return {};
  }
  out = script_.template_text;
  replace_all(out, "%T", prompt.target.surface);
  replace_all(out, "%D", chosen);
  return out;
}

ChatResponse MockModel::chat(const ChatRequest& request) {
  if (!request.prompt) throw Error(ErrorCode::InvalidInput, "mock model needs the assessment prompt");
  const MockRule& rule = rule_for(*request.prompt, request.repetition);
  if (rule.respond == MockRespond::Fail) {
    if (rule.fail_attempts < 0) throw Error(rule.error, "scripted failure");
    std::lock_guard lock(mu_);
    int& n = attempts_[{request.prompt->prompt_id, request.repetition}];
    if (n < rule.fail_attempts) {
      ++n;
      throw Error(rule.error, fmt::format("scripted failure {}/{}", n, rule.fail_attempts));
    }
    ChatResponse ok;
    // Once the scripted failures are used up the request succeeds with the default response.
    ok.text = script_.fallback.respond == MockRespond::Fail ? std::string() : render_rule(script_.fallback, *request.prompt);
    return ok;
  }
  ChatResponse r;
  r.text = render(*request.prompt, request.repetition);
  if (request.params.logprobs) {
    std::vector<TokenLogprob> lp;
    for (const auto& tok : mock_tokenize(r.text)) {
      auto it = script_.token_probs.find(text::casefold(tok));
      lp.push_back({tok, std::log(it == script_.token_probs.end() ? script_.default_token_prob : it->second)});
    }
    r.token_logprobs = std::move(lp);
  }
  return r;
}

std::vector<std::string> mock_tokenize(std::string_view s) {
  std::vector<std::string> out;
  size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    size_t j = i;
    while (j < s.size() && !std::isspace(static_cast<unsigned char>(s[j]))) ++j;
    if (j == i) break;
    std::string_view w = s.substr(i, j - i);
    size_t k = w.size();
    while (k > 0 && std::ispunct(static_cast<unsigned char>(w[k - 1]))) --k;
    if (k > 0) out.emplace_back(w.substr(0, k));
    if (k < w.size()) out.emplace_back(w.substr(k));
    i = j;
  }
  return out;
}

SequenceScore MockModel::sequence_logprob(std::string_view continuation, std::string_view) {
  auto toks = mock_tokenize(continuation);
  if (toks.empty()) throw Error(ErrorCode::InvalidInput, "empty continuation");
  SequenceScore s;
  for (const auto& t : toks) {
    auto it = script_.token_probs.find(text::casefold(t));
    s.total_logprob += std::log(it == script_.token_probs.end() ? script_.default_token_prob : it->second);
  }
  s.tokens = toks.size();
  return s;
}

}  // namespace genderpair
