#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "genderpair/error.hpp"
#include "genderpair/promptgen.hpp"

namespace genderpair {

struct GenerationParams {
  std::string model;
  double temperature = 0.7;
  double top_p = 0.9;
  std::optional<int> top_k;
  int max_tokens = 256;
  std::optional<double> repetition_penalty;
  std::optional<int64_t> seed;
  bool logprobs = false;

  // Throws InvalidInput on out-of-range values.
  void validate() const;
  bool operator==(const GenerationParams&) const = default;
};

Json to_json(const GenerationParams& p);
GenerationParams params_from_json(const Json& j);

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;
  bool operator==(const TokenLogprob&) const = default;
};

struct ChatRequest {
  const AssessmentPrompt* prompt = nullptr;  // may be null for free-form requests
  std::string text;
  GenerationParams params;
  int repetition = 0;
};

struct ChatResponse {
  std::string text;
  std::optional<std::vector<TokenLogprob>> token_logprobs;
};

class ChatModel {
 public:
  virtual ~ChatModel() = default;
  // Throws EndpointUnreachable / RateLimited / MalformedResponse. Must be thread-safe.
  virtual ChatResponse chat(const ChatRequest& request) = 0;
  virtual std::string endpoint_id() const = 0;
};

struct SequenceScore {
  double total_logprob = 0.0;
  size_t tokens = 0;

  double perplexity() const;
};

class LogprobModel {
 public:
  virtual ~LogprobModel() = default;
  // Sum of log p over the tokens of `continuation` given `context`. Throws LogprobsUnsupported,
  // InvalidInput on empty continuation.
  virtual SequenceScore sequence_logprob(std::string_view continuation, std::string_view context) = 0;
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;
void real_sleep(std::chrono::milliseconds d);

struct RetryPolicy {
  int max_retries = 5;
  std::chrono::milliseconds base_delay{250};
  std::chrono::milliseconds max_delay{8000};
  SleepFn sleep = real_sleep;

  std::chrono::milliseconds delay_for(int attempt) const;
  static bool retryable(ErrorCode c) { return c == ErrorCode::RateLimited || c == ErrorCode::EndpointUnreachable; }
};

// Runs `fn`, retrying retryable errors. `retries` receives the number of retries performed, also
// when the final attempt throws.
template <typename Fn>
auto with_retry(const RetryPolicy& policy, Fn&& fn, int& retries) -> decltype(fn()) {
  retries = 0;
  while (true) {
    try {
      return fn();
    } catch (const Error& e) {
      if (!RetryPolicy::retryable(e.code()) || retries >= policy.max_retries) throw;
      policy.sleep(policy.delay_for(retries));
      ++retries;
    }
  }
}

// Token bucket shared by all workers. rate <= 0 disables limiting.
class RateLimiter {
 public:
  RateLimiter(double per_second = 0.0, double burst = 1.0, SleepFn sleep = real_sleep);
  void acquire();

 private:
  double rate_;
  double burst_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
  SleepFn sleep_;
  std::mutex mu_;
};

using TimestampFn = std::function<std::string()>;
std::string utc_timestamp_now();

struct ResponseRecord {
  std::string prompt_id;
  GroupId group = GroupId::Group1;
  int config = 1;
  int repetition_index = 0;
  std::string raw_text;
  std::optional<std::vector<TokenLogprob>> token_logprobs;
  std::string endpoint;
  GenerationParams params;
  std::string timestamp;
  int64_t latency_ms = 0;
  int retry_count = 0;
  std::optional<ErrorCode> error;  // set for failure records
  std::string error_message;

  bool failed() const { return error.has_value(); }
};

Json to_json(const ResponseRecord& r);
ResponseRecord response_from_json(const Json& j);

struct CompleteOptions {
  RetryPolicy retry;
  RateLimiter* limiter = nullptr;
  TimestampFn timestamp = utc_timestamp_now;
  bool measure_latency = true;
};

// Never throws for endpoint errors: they become failure records after retries.
ResponseRecord complete(ChatModel& model, const AssessmentPrompt& prompt, const GenerationParams& params,
                        int repetition_index, const CompleteOptions& options = {});

}  // namespace genderpair
