#pragma once

#include <chrono>
#include <memory>
#include <string>

#include "genderpair/model_client.hpp"

namespace genderpair {

inline constexpr const char* kEndpointEnv = "GENDERPAIR_ENDPOINT";
inline constexpr const char* kApiKeyEnv = "GENDERPAIR_API_KEY";
inline constexpr const char* kModelEnv = "GENDERPAIR_MODEL";

struct EndpointConfig {
  std::string base_url;  // e.g. http://localhost:8000/v1
  std::string api_key;
  std::chrono::seconds timeout{120};
};

struct ParsedUrl {
  std::string scheme_host_port;  // http://host:port
  std::string path;              // /v1, no trailing slash
};
// Throws InvalidInput for anything other than http(s)://host[:port][/path].
ParsedUrl parse_url(const std::string& url);

// Chat-completions compatible HTTP client. POST {base}/chat/completions and {base}/completions.
class OpenAIClient : public ChatModel, public LogprobModel {
 public:
  explicit OpenAIClient(EndpointConfig config, GenerationParams logprob_params = {});
  ~OpenAIClient() override;

  ChatResponse chat(const ChatRequest& request) override;
  std::string endpoint_id() const override { return config_.base_url; }

  // Uses the legacy completions route with echo=true; tokens whose offsets start inside the
  // context are excluded.
  SequenceScore sequence_logprob(std::string_view continuation, std::string_view context) override;

  static Json chat_body(const ChatRequest& request);
  static ChatResponse parse_chat_response(const std::string& body, bool want_logprobs);
  static SequenceScore parse_echo_logprobs(const std::string& body, size_t context_bytes, size_t total_bytes);

 private:
  std::string post(const std::string& route, const Json& body, ErrorCode client_error);

  EndpointConfig config_;
  ParsedUrl url_;
  GenerationParams logprob_params_;
};

}  // namespace genderpair
