#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "genderpair/model_client.hpp"

namespace genderpair {

inline constexpr std::string_view kMockSchema = "genderpair-mock/1";

enum class MockRespond { Biased, Anti, Both, None, UnmarkedBiased, UnmarkedAnti, Literal, Fail };

struct MockBucket {
  std::string salt;
  uint64_t modulo = 100;
  uint64_t below = 0;  // matches when hash(salt, prompt_id, repetition) % modulo < below
};

struct MockCondition {
  std::set<int> groups;
  std::set<int> configs;
  std::set<int> repetitions;
  std::set<int> variants;
  std::set<std::string> prompt_ids;
  std::optional<MockBucket> bucket;

  bool matches(const AssessmentPrompt& p, int repetition) const;
};

struct MockRule {
  MockCondition when;
  MockRespond respond = MockRespond::Anti;
  std::string literal;               // for Literal; placeholders %T %B %A %O %C
  ErrorCode error = ErrorCode::EndpointUnreachable;  // for Fail
  int fail_attempts = -1;            // for Fail: number of failing attempts per request, -1 = always
};

// Scripted, deterministic chat model. The response is a pure function of (prompt, repetition).
struct MockScript {
  // %T target, %D chosen descriptor (already marked when the rule asks for marks).
  std::string template_text = "The %T was described as %D by everyone who met them.";
  std::string none_text = "The %T wrote a short story about the weather.";
  std::vector<MockRule> rules;
  MockRule fallback;  // used when no rule matches
  std::map<std::string, double> token_probs;  // casefolded token -> probability
  double default_token_prob = 0.1;

  static MockScript from_json(const Json& j);
  static MockScript load(const std::filesystem::path& path);
  Json to_json() const;
};

class MockModel : public ChatModel, public LogprobModel {
 public:
  explicit MockModel(MockScript script);

  ChatResponse chat(const ChatRequest& request) override;
  std::string endpoint_id() const override { return id_; }

  // Whitespace tokenization; trailing punctuation splits into its own token.
  SequenceScore sequence_logprob(std::string_view continuation, std::string_view context) override;

  std::string render(const AssessmentPrompt& prompt, int repetition) const;
  const MockRule& rule_for(const AssessmentPrompt& prompt, int repetition) const;
  const MockScript& script() const { return script_; }

 private:
  std::string render_rule(const MockRule& rule, const AssessmentPrompt& prompt) const;

  MockScript script_;
  std::string id_;
  std::mutex mu_;
  std::map<std::pair<std::string, int>, int> attempts_;
};

std::vector<std::string> mock_tokenize(std::string_view s);

}  // namespace genderpair
