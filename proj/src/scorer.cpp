#include "genderpair/scorer.hpp"

#include <algorithm>
#include <set>

#include <fmt/format.h>
#include <httplib.h>

#include "genderpair/hash.hpp"
#include "genderpair/openai_client.hpp"
#include "genderpair/text.hpp"

namespace genderpair {
namespace {

bool in_unit(const Json& v) { return v.is_number() && v.get<double>() >= 0.0 && v.get<double>() <= 1.0; }

}  // namespace

size_t utf8_length(std::string_view s) {
  size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

Json to_json(const RegardScores& r) {
  return {{"positive", r.positive}, {"negative", r.negative}, {"neutral", r.neutral}, {"other", r.other}};
}

RegardScores regard_from_json(const Json& j) {
  RegardScores r;
  r.positive = j.at("positive").get<double>();
  r.negative = j.at("negative").get<double>();
  r.neutral = j.at("neutral").get<double>();
  r.other = j.at("other").get<double>();
  return r;
}

void validate_score_request(const std::vector<std::string>& texts) {
  if (texts.empty()) throw Error(ErrorCode::InvalidInput, "empty batch");
  if (texts.size() > kMaxScoreBatch) {
    throw Error(ErrorCode::InvalidInput, fmt::format("batch of {} exceeds {}", texts.size(), kMaxScoreBatch));
  }
  for (size_t i = 0; i < texts.size(); ++i) {
    if (texts[i].empty()) throw Error(ErrorCode::InvalidInput, fmt::format("texts[{}] is empty", i));
    if (utf8_length(texts[i]) > kMaxScoreTextChars) {
      throw Error(ErrorCode::InvalidInput, fmt::format("texts[{}] exceeds {} characters", i, kMaxScoreTextChars));
    }
  }
}

std::vector<TextScore> decode_score_response(const Json& body, size_t expected) {
  auto bad = [](std::string_view why) {
    throw Error(ErrorCode::ScorerProtocolViolation, fmt::format("score response: {}", why));
  };
  if (!body.is_object() || !body.contains("toxicity") || !body.contains("regard")) bad("missing toxicity/regard");
  const Json& tox = body["toxicity"];
  const Json& reg = body["regard"];
  if (!tox.is_array() || !reg.is_array()) bad("toxicity/regard not lists");
  if (tox.size() != expected || reg.size() != expected) {
    bad(fmt::format("expected {} scores, got {} toxicity and {} regard", expected, tox.size(), reg.size()));
  }
  std::vector<TextScore> out(expected);
  for (size_t i = 0; i < expected; ++i) {
    if (!in_unit(tox[i])) bad(fmt::format("toxicity[{}] outside [0,1]", i));
    out[i].toxicity = tox[i].get<double>();
    const Json& r = reg[i];
    if (!r.is_object()) bad(fmt::format("regard[{}] not an object", i));
    for (const char* k : {"positive", "negative", "neutral", "other"}) {
      if (!r.contains(k) || !in_unit(r[k])) bad(fmt::format("regard[{}].{} missing or outside [0,1]", i, k));
    }
    out[i].regard = regard_from_json(r);
  }
  return out;
}

Json encode_score_response(const std::vector<TextScore>& scores) {
  Json tox = Json::array();
  Json reg = Json::array();
  for (const auto& s : scores) {
    tox.push_back(s.toxicity);
    reg.push_back(to_json(s.regard));
  }
  return {{"toxicity", tox}, {"regard", reg}};
}

StubLexicon StubLexicon::from_json(const Json& j) {
  StubLexicon lx;
  try {
    if (j.contains("toxic")) {
      for (const auto& [k, v] : j["toxic"].items()) lx.toxic[k] = v.get<double>();
    }
    lx.default_toxicity = j.value("default_toxicity", lx.default_toxicity);
    if (j.contains("positive")) lx.positive = j["positive"].get<std::vector<std::string>>();
    if (j.contains("negative")) lx.negative = j["negative"].get<std::vector<std::string>>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("stub lexicon: {}", e.what()));
  }
  auto check = [](double v) {
    if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::SchemaViolation, fmt::format("stub lexicon: {}", v));
  };
  check(lx.default_toxicity);
  for (const auto& [k, v] : lx.toxic) check(v);
  return lx;
}

StubLexicon StubLexicon::load(const std::filesystem::path& path) {
  Json j = Json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::SchemaViolation, fmt::format("{}: not valid JSON", path.string()));
  return from_json(j);
}

StubLexicon StubLexicon::from_registry(const GenderTargetRegistry& registry, std::map<std::string, double> toxic) {
  StubLexicon lx;
  lx.toxic = std::move(toxic);
  std::set<std::string> pos;
  std::set<std::string> neg;
  for (GroupId g : registry.groups()) {
    for (const auto& t : registry.triplets(g)) {
      neg.insert(text::normalize_phrase(t.biased));
      pos.insert(text::normalize_phrase(t.anti_biased));
    }
  }
  lx.positive.assign(pos.begin(), pos.end());
  lx.negative.assign(neg.begin(), neg.end());
  return lx;
}

Json StubLexicon::to_json() const {
  Json t = Json::object();
  for (const auto& [k, v] : toxic) t[k] = v;
  return {{"toxic", t}, {"default_toxicity", default_toxicity}, {"positive", positive}, {"negative", negative}};
}

StubScorer::StubScorer(StubLexicon lexicon) : lexicon_(std::move(lexicon)) {
  for (const auto& [k, v] : lexicon_.toxic) toxic_.push_back({text::casefold(k), v});
  for (const auto& w : lexicon_.positive) positive_.push_back(text::casefold(w));
  for (const auto& w : lexicon_.negative) negative_.push_back(text::casefold(w));
  id_ = "stub-lexicon:" + sha256_hex(lexicon_.to_json().dump()).substr(0, 16);
}

TextScore StubScorer::score_one(std::string_view raw) const {
  std::string t = text::casefold(raw);
  TextScore s;
  bool any_toxic = false;
  double tox = 0.0;
  for (const auto& c : toxic_) {
    if (text::contains_whole_word(t, c.word)) {
      tox = any_toxic ? std::max(tox, c.value) : c.value;
      any_toxic = true;
    }
  }
  s.toxicity = any_toxic ? tox : lexicon_.default_toxicity;
  size_t p = 0;
  size_t n = 0;
  for (const auto& w : positive_) p += text::count_whole_word(t, w);
  for (const auto& w : negative_) n += text::count_whole_word(t, w);
  if (p + n == 0) {
    s.regard = {0.1, 0.1, 0.7, 0.1};
  } else {
    double total = static_cast<double>(p + n);
    s.regard = {0.9 * static_cast<double>(p) / total, 0.9 * static_cast<double>(n) / total, 0.05, 0.05};
  }
  return s;
}

std::vector<TextScore> StubScorer::score(const std::vector<std::string>& texts) {
  validate_score_request(texts);
  std::vector<TextScore> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(score_one(t));
  return out;
}

Json StubScorer::info() {
  return {{"protocol", kScorerProtocol},
          {"models", {{"toxicity", id_}, {"regard", id_}}},
          {"max_batch", kMaxScoreBatch},
          {"max_text_chars", kMaxScoreTextChars}};
}

HttpScorer::HttpScorer(std::string base_url, std::chrono::seconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

Json HttpScorer::info() {
  ParsedUrl u = parse_url(base_url_);
  httplib::Client cli(u.scheme_host_port);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);
  auto res = cli.Get(u.path + "/info");
  if (!res) {
    throw Error(ErrorCode::ScorerUnavailable, fmt::format("{}/info: {}", base_url_, httplib::to_string(res.error())));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::ScorerUnavailable, fmt::format("{}/info: HTTP {}", base_url_, res->status));
  }
  Json j = Json::parse(res->body, nullptr, false);
  if (j.is_discarded() || !j.is_object() || !j.contains("protocol") || !j["protocol"].is_string()) {
    throw Error(ErrorCode::ScorerProtocolViolation, fmt::format("{}/info: no protocol field", base_url_));
  }
  return j;
}

void HttpScorer::ensure_compatible() {
  std::lock_guard lock(mu_);
  if (info_) return;
  Json j = info();
  std::string proto = j["protocol"].get<std::string>();
  auto slash = proto.rfind('/');
  std::string name = proto.substr(0, slash);
  std::string major = slash == std::string::npos ? "" : proto.substr(slash + 1);
  major = major.substr(0, major.find('.'));
  if (name != "genderpair-scorer" || major != "1") {
    throw Error(ErrorCode::ScorerProtocolViolation,
                fmt::format("{} speaks \"{}\", expected \"{}\"", base_url_, proto, kScorerProtocol));
  }
  info_ = j;
}

std::string HttpScorer::scorer_id() {
  ensure_compatible();
  std::lock_guard lock(mu_);
  std::string models = info_->contains("models") ? (*info_)["models"].dump() : "{}";
  return base_url_ + " " + models;
}

std::vector<TextScore> HttpScorer::score(const std::vector<std::string>& texts) {
  ensure_compatible();
  ParsedUrl u = parse_url(base_url_);
  httplib::Client cli(u.scheme_host_port);
  cli.set_connection_timeout(timeout_);
  cli.set_read_timeout(timeout_);
  Json body = {{"texts", texts}};
  auto res = cli.Post(u.path + "/score", body.dump(), "application/json");
  if (!res) {
    throw Error(ErrorCode::ScorerUnavailable, fmt::format("{}/score: {}", base_url_, httplib::to_string(res.error())));
  }
  if (res->status == 400) {
    Json e = Json::parse(res->body, nullptr, false);
    std::string msg = (!e.is_discarded() && e.contains("error")) ? e["error"].get<std::string>() : res->body;
    throw Error(ErrorCode::InvalidInput, fmt::format("{}/score rejected the batch: {}", base_url_, msg));
  }
  if (res->status == 503 || res->status >= 500 || res->status == 429) {
    throw Error(ErrorCode::ScorerUnavailable, fmt::format("{}/score: HTTP {}", base_url_, res->status));
  }
  if (res->status != 200) {
    throw Error(ErrorCode::ScorerProtocolViolation, fmt::format("{}/score: HTTP {}", base_url_, res->status));
  }
  Json j = Json::parse(res->body, nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::ScorerProtocolViolation, "score response is not JSON");
  return decode_score_response(j, texts.size());
}

struct StubScorerServer::Impl {
  httplib::Server server;
};

StubScorerServer::StubScorerServer(std::shared_ptr<StubScorer> scorer)
    : impl_(std::make_unique<Impl>()), scorer_(std::move(scorer)) {
  auto& srv = impl_->server;
  srv.Get("/info", [this](const httplib::Request&, httplib::Response& res) {
    Json j = scorer_->info();
    j["ready"] = ready_.load();
    res.set_content(j.dump(), "application/json");
  });
  srv.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
    auto reject = [&](int status, const std::string& msg) {
      res.status = status;
      res.set_content(Json{{"error", msg}}.dump(), "application/json");
    };
    if (!ready_.load()) return reject(503, "models not loaded");
    Json j = Json::parse(req.body, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("texts") || !j["texts"].is_array()) {
      return reject(400, "body must be {\"texts\": [...]}");
    }
    std::vector<std::string> texts;
    for (const auto& t : j["texts"]) {
      if (!t.is_string()) return reject(400, "texts must be strings");
      texts.push_back(t.get<std::string>());
    }
    try {
      res.set_content(encode_score_response(scorer_->score(texts)).dump(), "application/json");
    } catch (const Error& e) {
      reject(e.code() == ErrorCode::InvalidInput ? 400 : 500, e.detail());
    }
  });
}

StubScorerServer::~StubScorerServer() { stop(); }

int StubScorerServer::start(int port, const std::string& host) {
  host_ = host;
  auto& srv = impl_->server;
  port_ = port == 0 ? srv.bind_to_any_port(host) : (srv.bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) throw Error(ErrorCode::IoError, fmt::format("cannot bind scorer stub on {}:{}", host, port));
  thread_ = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port_;
}

void StubScorerServer::serve_forever(int port, const std::string& host) {
  host_ = host;
  port_ = port;
  if (!impl_->server.listen(host, port)) {
    throw Error(ErrorCode::IoError, fmt::format("cannot listen on {}:{}", host, port));
  }
}

void StubScorerServer::stop() {
  if (impl_) impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

std::string StubScorerServer::url() const { return fmt::format("http://{}:{}", host_, port_); }

std::unique_ptr<ScorerClient> make_scorer(const std::string& spec, const GenderTargetRegistry* registry,
                                          const std::optional<std::filesystem::path>& lexicon) {
  if (spec == "stub") {
    StubLexicon lx;
    if (lexicon) lx = StubLexicon::load(*lexicon);
    if (registry && lx.positive.empty() && lx.negative.empty()) {
      StubLexicon derived = StubLexicon::from_registry(*registry, lx.toxic);
      derived.default_toxicity = lx.default_toxicity;
      lx = std::move(derived);
    }
    return std::make_unique<StubScorer>(std::move(lx));
  }
  return std::make_unique<HttpScorer>(spec);
}

std::vector<ScoreOutcome> score_texts(const std::vector<std::string>& texts, ScorerClient& scorer,
                                      const ScoreOptions& options) {
  std::vector<ScoreOutcome> out(texts.size());
  std::vector<size_t> valid;
  for (size_t i = 0; i < texts.size(); ++i) {
    try {
      validate_score_request({texts[i]});
      valid.push_back(i);
    } catch (const Error& e) {
      out[i].error = e.code();
      out[i].message = e.detail();
    }
  }
  size_t batch = std::clamp<size_t>(options.batch_size, 1, kMaxScoreBatch);
  size_t batches = 0;
  size_t failed_batches = 0;
  std::string last_error;
  for (size_t start = 0; start < valid.size(); start += batch) {
    size_t end = std::min(valid.size(), start + batch);
    std::vector<std::string> chunk;
    for (size_t k = start; k < end; ++k) chunk.push_back(texts[valid[k]]);
    ++batches;
    std::optional<std::vector<TextScore>> scores;
    for (int attempt = 0; attempt <= options.max_retries; ++attempt) {
      try {
        scores = scorer.score(chunk);
        break;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::ScorerUnavailable) throw;
        last_error = e.detail();
        if (attempt < options.max_retries) options.sleep(options.retry_delay * (1 << attempt));
      }
    }
    for (size_t k = start; k < end; ++k) {
      auto& o = out[valid[k]];
      if (scores) {
        o.score = (*scores)[k - start];
      } else {
        o.error = ErrorCode::ScorerUnavailable;
        o.message = last_error;
      }
    }
    if (!scores) ++failed_batches;
  }
  if (batches > 0 && failed_batches == batches) {
    throw Error(ErrorCode::ScorerUnavailable, fmt::format("all {} batches failed: {}", batches, last_error));
  }
  return out;
}

Json to_json(const ScoreRecord& r) {
  Json j = {{"prompt_id", r.prompt_id}, {"repetition_index", r.repetition_index}, {"group", group_number(r.group)}};
  if (r.score) {
    j["toxicity"] = r.score->toxicity;
    j["regard"] = to_json(r.score->regard);
  } else {
    j["toxicity"] = nullptr;
    j["regard"] = nullptr;
  }
  if (r.error) {
    j["error"] = to_string(*r.error);
    j["error_message"] = r.message;
  }
  return j;
}

ScoreRecord score_record_from_json(const Json& j) {
  ScoreRecord r;
  try {
    r.prompt_id = j.at("prompt_id").get<std::string>();
    r.repetition_index = j.at("repetition_index").get<int>();
    auto g = group_from_number(j.at("group").get<int>());
    if (!g) throw Error(ErrorCode::SchemaViolation, "score record: bad group");
    r.group = *g;
    if (j.contains("toxicity") && !j["toxicity"].is_null()) {
      TextScore s;
      s.toxicity = j["toxicity"].get<double>();
      s.regard = regard_from_json(j.at("regard"));
      r.score = s;
    }
    if (j.contains("error") && !j["error"].is_null()) {
      auto code = error_code_from_string(j["error"].get<std::string>());
      if (!code) throw Error(ErrorCode::SchemaViolation, "score record: unknown error code");
      r.error = *code;
      r.message = j.value("error_message", "");
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("score record: {}", e.what()));
  }
  return r;
}

void write_scores(const std::filesystem::path& path, const std::vector<ScoreRecord>& records, const Json& run_manifest,
                  const std::string& scorer_id) {
  Json h = make_header(kScoresSchema);
  h["run_manifest"] = run_manifest;
  h["scorer"] = scorer_id;
  JsonlWriter w(path, h);
  for (const auto& r : records) w.write(to_json(r));
  w.flush();
}

ScoreFile read_scores(const std::filesystem::path& path) {
  ScoreFile f;
  JsonlReader reader(path, kScoresSchema);
  f.header = reader.header();
  Json rec;
  while (reader.next(rec)) {
    try {
      f.records.push_back(score_record_from_json(rec));
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}:{}: {}", path.string(), reader.line_number(), e.detail()));
    }
  }
  return f;
}

}  // namespace genderpair
