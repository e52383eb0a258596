#include "genderpair/model_client.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <thread>

#include <fmt/format.h>

namespace genderpair {

void GenerationParams::validate() const {
  if (!(temperature >= 0.0)) throw Error(ErrorCode::InvalidInput, fmt::format("temperature {} < 0", temperature));
  if (!(top_p > 0.0 && top_p <= 1.0)) throw Error(ErrorCode::InvalidInput, fmt::format("top_p {} not in (0,1]", top_p));
  if (top_k && *top_k <= 0) throw Error(ErrorCode::InvalidInput, fmt::format("top_k {} must be positive", *top_k));
  if (max_tokens <= 0) throw Error(ErrorCode::InvalidInput, fmt::format("max_tokens {} must be positive", max_tokens));
}

Json to_json(const GenerationParams& p) {
  Json j = {{"model", p.model}, {"temperature", p.temperature}, {"top_p", p.top_p}, {"max_tokens", p.max_tokens}};
  j["top_k"] = p.top_k ? Json(*p.top_k) : Json(nullptr);
  j["repetition_penalty"] = p.repetition_penalty ? Json(*p.repetition_penalty) : Json(nullptr);
  j["seed"] = p.seed ? Json(*p.seed) : Json(nullptr);
  j["logprobs"] = p.logprobs;
  return j;
}

GenerationParams params_from_json(const Json& j) {
  if (!j.is_object()) throw Error(ErrorCode::SchemaViolation, "params: not an object");
  GenerationParams p;
  try {
    p.model = j.value("model", "");
    p.temperature = j.value("temperature", p.temperature);
    p.top_p = j.value("top_p", p.top_p);
    p.max_tokens = j.value("max_tokens", p.max_tokens);
    if (j.contains("top_k") && !j["top_k"].is_null()) p.top_k = j["top_k"].get<int>();
    if (j.contains("repetition_penalty") && !j["repetition_penalty"].is_null()) {
      p.repetition_penalty = j["repetition_penalty"].get<double>();
    }
    if (j.contains("seed") && !j["seed"].is_null()) p.seed = j["seed"].get<int64_t>();
    p.logprobs = j.value("logprobs", false);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("params: {}", e.what()));
  }
  return p;
}

double SequenceScore::perplexity() const {
  if (tokens == 0) throw Error(ErrorCode::InvalidInput, "perplexity of zero tokens");
  return std::exp(-total_logprob / static_cast<double>(tokens));
}

void real_sleep(std::chrono::milliseconds d) {
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

std::chrono::milliseconds RetryPolicy::delay_for(int attempt) const {
  double d = static_cast<double>(base_delay.count()) * std::pow(2.0, attempt);
  return std::chrono::milliseconds(static_cast<int64_t>(std::min(d, static_cast<double>(max_delay.count()))));
}

RateLimiter::RateLimiter(double per_second, double burst, SleepFn sleep)
    : rate_(per_second),
      burst_(std::max(1.0, burst)),
      tokens_(std::max(1.0, burst)),
      last_(std::chrono::steady_clock::now()),
      sleep_(std::move(sleep)) {}

void RateLimiter::acquire() {
  if (rate_ <= 0.0) return;
  while (true) {
    std::chrono::milliseconds wait{0};
    {
      std::lock_guard lock(mu_);
      auto now = std::chrono::steady_clock::now();
      double elapsed = std::chrono::duration<double>(now - last_).count();
      last_ = now;
      tokens_ = std::min(burst_, tokens_ + elapsed * rate_);
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      wait = std::chrono::milliseconds(static_cast<int64_t>(std::ceil((1.0 - tokens_) / rate_ * 1000.0)));
    }
    sleep_(wait);
  }
}

std::string utc_timestamp_now() {
  std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Json to_json(const ResponseRecord& r) {
  Json j = {{"kind", r.failed() ? "failure" : "response"},
            {"prompt_id", r.prompt_id},
            {"group", group_number(r.group)},
            {"config", r.config},
            {"repetition_index", r.repetition_index},
            {"raw_text", r.raw_text}};
  if (r.token_logprobs) {
    Json lp = Json::array();
    for (const auto& t : *r.token_logprobs) lp.push_back(Json::array({t.token, t.logprob}));
    j["token_logprobs"] = lp;
  } else {
    j["token_logprobs"] = nullptr;
  }
  j["endpoint"] = r.endpoint;
  j["params"] = to_json(r.params);
  j["timestamp"] = r.timestamp;
  j["latency_ms"] = r.latency_ms;
  j["retry_count"] = r.retry_count;
  if (r.error) {
    j["error"] = to_string(*r.error);
    j["error_message"] = r.error_message;
  }
  return j;
}

ResponseRecord response_from_json(const Json& j) {
  auto fail = [&](std::string_view what) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("response record: {}", what));
  };
  if (!j.is_object()) fail("not an object");
  for (const char* key : {"prompt_id", "group", "repetition_index", "raw_text"}) {
    if (!j.contains(key)) fail(fmt::format("missing \"{}\"", key));
  }
  ResponseRecord r;
  try {
    r.prompt_id = j["prompt_id"].get<std::string>();
    auto g = group_from_number(j["group"].get<int>());
    if (!g) fail("bad group");
    r.group = *g;
    r.config = j.value("config", 1);
    r.repetition_index = j["repetition_index"].get<int>();
    if (r.repetition_index < 0) fail("negative repetition_index");
    r.raw_text = j["raw_text"].get<std::string>();
    if (j.contains("token_logprobs") && j["token_logprobs"].is_array()) {
      std::vector<TokenLogprob> lp;
      for (const auto& t : j["token_logprobs"]) lp.push_back({t.at(0).get<std::string>(), t.at(1).get<double>()});
      r.token_logprobs = std::move(lp);
    }
    r.endpoint = j.value("endpoint", "");
    if (j.contains("params")) r.params = params_from_json(j["params"]);
    r.timestamp = j.value("timestamp", "");
    r.latency_ms = j.value("latency_ms", int64_t{0});
    r.retry_count = j.value("retry_count", 0);
    if (j.contains("error") && !j["error"].is_null()) {
      auto code = error_code_from_string(j["error"].get<std::string>());
      if (!code) fail(fmt::format("unknown error code {}", j["error"].dump()));
      r.error = *code;
      r.error_message = j.value("error_message", "");
    }
  } catch (const Json::exception& e) {
    fail(e.what());
  }
  return r;
}

ResponseRecord complete(ChatModel& model, const AssessmentPrompt& prompt, const GenerationParams& params,
                        int repetition_index, const CompleteOptions& options) {
  ResponseRecord rec;
  rec.prompt_id = prompt.prompt_id;
  rec.group = prompt.group;
  rec.config = prompt.config.index;
  rec.repetition_index = repetition_index;
  rec.endpoint = model.endpoint_id();
  rec.params = params;

  ChatRequest req{&prompt, prompt.text, params, repetition_index};
  auto start = std::chrono::steady_clock::now();
  try {
    int retries = 0;
    try {
      ChatResponse resp = with_retry(
          options.retry,
          [&] {
            if (options.limiter) options.limiter->acquire();
            return model.chat(req);
          },
          retries);
      rec.raw_text = std::move(resp.text);
      rec.token_logprobs = std::move(resp.token_logprobs);
    } catch (...) {
      rec.retry_count = retries;
      throw;
    }
    rec.retry_count = retries;
  } catch (const Error& e) {
    if (!is_upstream(e.code())) throw;
    rec.error = e.code();
    rec.error_message = e.detail();
  }
  auto end = std::chrono::steady_clock::now();
  rec.latency_ms =
      options.measure_latency ? std::chrono::duration_cast<std::chrono::milliseconds>(end - start).count() : 0;
  rec.timestamp = options.timestamp ? options.timestamp() : std::string();
  return rec;
}

}  // namespace genderpair
