#include "genderpair/openai_client.hpp"

#include <regex>

#include <fmt/format.h>
#include <httplib.h>

namespace genderpair {

ParsedUrl parse_url(const std::string& url) {
  static const std::regex re(R"(^(https?)://([^/:]+)(:[0-9]{1,5})?(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error(ErrorCode::InvalidInput, fmt::format("bad endpoint URL \"{}\"", url));
  ParsedUrl out;
  out.scheme_host_port = m[1].str() + "://" + m[2].str() + m[3].str();
  out.path = m[4].str();
  while (!out.path.empty() && out.path.back() == '/') out.path.pop_back();
  return out;
}

OpenAIClient::OpenAIClient(EndpointConfig config, GenerationParams logprob_params)
    : config_(std::move(config)), url_(parse_url(config_.base_url)), logprob_params_(std::move(logprob_params)) {}

OpenAIClient::~OpenAIClient() = default;

std::string OpenAIClient::post(const std::string& route, const Json& body, ErrorCode client_error) {
  // httplib::Client is not safe for concurrent use, so each call gets its own.
  httplib::Client cli(url_.scheme_host_port);
  cli.set_connection_timeout(config_.timeout);
  cli.set_read_timeout(config_.timeout);
  cli.set_write_timeout(config_.timeout);
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto res = cli.Post(url_.path + route, headers, body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::EndpointUnreachable,
                fmt::format("{}{}: {}", config_.base_url, route, httplib::to_string(res.error())));
  }
  if (res->status == 429) throw Error(ErrorCode::RateLimited, fmt::format("{}{}: HTTP 429", config_.base_url, route));
  if (res->status >= 500) {
    throw Error(ErrorCode::EndpointUnreachable, fmt::format("{}{}: HTTP {}", config_.base_url, route, res->status));
  }
  if (res->status != 200) {
    throw Error(client_error,
                fmt::format("{}{}: HTTP {}: {}", config_.base_url, route, res->status, res->body.substr(0, 200)));
  }
  return res->body;
}

Json OpenAIClient::chat_body(const ChatRequest& request) {
  const auto& p = request.params;
  Json body = {{"model", p.model},
               {"messages", Json::array({{{"role", "user"}, {"content", request.text}}})},
               {"temperature", p.temperature},
               {"top_p", p.top_p},
               {"max_tokens", p.max_tokens}};
  if (p.top_k) body["top_k"] = *p.top_k;
  if (p.repetition_penalty) body["repetition_penalty"] = *p.repetition_penalty;
  if (p.seed) body["seed"] = *p.seed;
  if (p.logprobs) body["logprobs"] = true;
  return body;
}

ChatResponse OpenAIClient::parse_chat_response(const std::string& body, bool want_logprobs) {
  Json j = Json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::MalformedResponse, "response is not a JSON object");
  const Json* choices = j.contains("choices") ? &j["choices"] : nullptr;
  if (!choices || !choices->is_array() || choices->empty()) throw Error(ErrorCode::MalformedResponse, "no choices");
  const Json& c0 = (*choices)[0];
  if (!c0.contains("message") || !c0["message"].contains("content") || !c0["message"]["content"].is_string()) {
    throw Error(ErrorCode::MalformedResponse, "choices[0].message.content missing");
  }
  ChatResponse out;
  out.text = c0["message"]["content"].get<std::string>();
  if (want_logprobs && c0.contains("logprobs") && c0["logprobs"].is_object() &&
      c0["logprobs"].contains("content") && c0["logprobs"]["content"].is_array()) {
    std::vector<TokenLogprob> lp;
    for (const auto& t : c0["logprobs"]["content"]) {
      if (!t.contains("token") || !t.contains("logprob") || !t["logprob"].is_number()) {
        throw Error(ErrorCode::MalformedResponse, "bad logprobs entry");
      }
      lp.push_back({t["token"].get<std::string>(), t["logprob"].get<double>()});
    }
    out.token_logprobs = std::move(lp);
  }
  return out;
}

ChatResponse OpenAIClient::chat(const ChatRequest& request) {
  std::string body = post("/chat/completions", chat_body(request), ErrorCode::MalformedResponse);
  return parse_chat_response(body, request.params.logprobs);
}

SequenceScore OpenAIClient::parse_echo_logprobs(const std::string& body, size_t context_bytes, size_t total_bytes) {
  Json j = Json::parse(body, nullptr, false);
  auto unsupported = [](std::string_view why) {
    throw Error(ErrorCode::LogprobsUnsupported, fmt::format("echo logprobs unavailable: {}", why));
  };
  if (j.is_discarded() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    unsupported("no choices");
  }
  const Json& c0 = j["choices"][0];
  if (!c0.contains("logprobs") || !c0["logprobs"].is_object()) unsupported("no logprobs object");
  const Json& lp = c0["logprobs"];
  if (!lp.contains("token_logprobs") || !lp.contains("text_offset")) unsupported("missing token_logprobs/text_offset");
  const Json& vals = lp["token_logprobs"];
  const Json& offs = lp["text_offset"];
  if (!vals.is_array() || !offs.is_array() || vals.size() != offs.size()) unsupported("misaligned arrays");
  SequenceScore s;
  for (size_t i = 0; i < vals.size(); ++i) {
    size_t off = offs[i].get<size_t>();
    if (off < context_bytes || off >= total_bytes) continue;
    if (!vals[i].is_number()) continue;  // first token of an empty context has no logprob
    s.total_logprob += vals[i].get<double>();
    ++s.tokens;
  }
  if (s.tokens == 0) unsupported("no continuation tokens scored");
  return s;
}

SequenceScore OpenAIClient::sequence_logprob(std::string_view continuation, std::string_view context) {
  if (continuation.empty()) throw Error(ErrorCode::InvalidInput, "empty continuation");
  std::string prompt = std::string(context) + std::string(continuation);
  Json body = {{"model", logprob_params_.model}, {"prompt", prompt}, {"echo", true},
               {"logprobs", 0},                  {"max_tokens", 1},  {"temperature", 0.0}};
  std::string resp = post("/completions", body, ErrorCode::LogprobsUnsupported);
  return parse_echo_logprobs(resp, context.size(), prompt.size());
}

}  // namespace genderpair
