#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "genderpair/model_client.hpp"
#include "genderpair/registry.hpp"

namespace genderpair {

inline constexpr std::string_view kScorerProtocol = "genderpair-scorer/1";
inline constexpr std::string_view kScoresSchema = "genderpair-scores/1";
inline constexpr size_t kMaxScoreBatch = 64;
inline constexpr size_t kMaxScoreTextChars = 4096;

struct RegardScores {
  double positive = 0.0;
  double negative = 0.0;
  double neutral = 0.0;
  double other = 0.0;
  bool operator==(const RegardScores&) const = default;
};

struct TextScore {
  double toxicity = 0.0;
  RegardScores regard;
  bool operator==(const TextScore&) const = default;
};

Json to_json(const RegardScores& r);
RegardScores regard_from_json(const Json& j);

// Wire-level request/response validation shared by clients and the stub server.
// Throws InvalidInput for an empty batch, a batch over 64 texts, an empty text or a text over 4096 characters.
void validate_score_request(const std::vector<std::string>& texts);
// Throws ScorerProtocolViolation when lists are misaligned or values leave [0,1].
std::vector<TextScore> decode_score_response(const Json& body, size_t expected);
Json encode_score_response(const std::vector<TextScore>& scores);
size_t utf8_length(std::string_view s);

class ScorerClient {
 public:
  virtual ~ScorerClient() = default;
  // Index-aligned with `texts`. Deterministic per text. Thread-safe.
  virtual std::vector<TextScore> score(const std::vector<std::string>& texts) = 0;
  virtual Json info() = 0;
  virtual std::string scorer_id() = 0;
};

struct StubLexicon {
  std::map<std::string, double> toxic;  // word -> toxicity
  double default_toxicity = 0.05;
  std::vector<std::string> positive;
  std::vector<std::string> negative;

  static StubLexicon from_json(const Json& j);
  static StubLexicon load(const std::filesystem::path& path);
  // Registry biased words as negative cues, anti-biased words as positive cues.
  static StubLexicon from_registry(const GenderTargetRegistry& registry, std::map<std::string, double> toxic = {});
  Json to_json() const;
};

// Lexicon scorer. Toxicity: max over toxic words present, else the default. Regard from counts p, n of
// positive and negative occurrences: none gives (0.1, 0.1, 0.7, 0.1); otherwise
// (0.9p/(p+n), 0.9n/(p+n), 0.05, 0.05).
class StubScorer : public ScorerClient {
 public:
  explicit StubScorer(StubLexicon lexicon);
  std::vector<TextScore> score(const std::vector<std::string>& texts) override;
  Json info() override;
  std::string scorer_id() override { return id_; }

  TextScore score_one(std::string_view text) const;

 private:
  struct Cue {
    std::string word;
    double value;
  };
  StubLexicon lexicon_;
  std::vector<Cue> toxic_;
  std::vector<std::string> positive_;
  std::vector<std::string> negative_;
  std::string id_;
};

// HTTP client for the scorer protocol. The first call checks /info for a matching protocol major version.
class HttpScorer : public ScorerClient {
 public:
  explicit HttpScorer(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(60));
  std::vector<TextScore> score(const std::vector<std::string>& texts) override;
  Json info() override;
  std::string scorer_id() override;

 private:
  void ensure_compatible();

  std::string base_url_;
  std::chrono::seconds timeout_;
  std::mutex mu_;
  std::optional<Json> info_;
};

// Serves a StubScorer over HTTP on 127.0.0.1.
class StubScorerServer {
 public:
  explicit StubScorerServer(std::shared_ptr<StubScorer> scorer);
  ~StubScorerServer();

  // port 0 picks a free port. Returns the bound port.
  int start(int port = 0, const std::string& host = "127.0.0.1");
  void stop();
  // Until ready, /score answers 503 while /info still answers 200.
  void set_ready(bool ready) { ready_ = ready; }
  int port() const { return port_; }
  std::string url() const;
  // Blocks serving on the calling thread.
  void serve_forever(int port, const std::string& host);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::shared_ptr<StubScorer> scorer_;
  std::atomic<bool> ready_{true};
  int port_ = 0;
  std::string host_ = "127.0.0.1";
  std::thread thread_;
};

// Returns "stub" for an in-process stub, otherwise an HTTP client for the URL.
std::unique_ptr<ScorerClient> make_scorer(const std::string& spec, const GenderTargetRegistry* registry,
                                          const std::optional<std::filesystem::path>& lexicon);

struct ScoreOutcome {
  std::optional<TextScore> score;
  std::optional<ErrorCode> error;
  std::string message;
};

struct ScoreOptions {
  size_t batch_size = kMaxScoreBatch;
  int max_retries = 3;
  std::chrono::milliseconds retry_delay{200};
  SleepFn sleep = real_sleep;
};

// Batches texts, retries unavailable batches, and records what still fails per text. Invalid texts
// become per-record InvalidInput failures without reaching the scorer. Throws ScorerProtocolViolation
// on a malformed response, ScorerUnavailable when every non-empty batch failed.
std::vector<ScoreOutcome> score_texts(const std::vector<std::string>& texts, ScorerClient& scorer,
                                      const ScoreOptions& options = {});

struct ScoreRecord {
  std::string prompt_id;
  int repetition_index = 0;
  GroupId group = GroupId::Group1;
  std::optional<TextScore> score;
  std::optional<ErrorCode> error;
  std::string message;
};

Json to_json(const ScoreRecord& r);
ScoreRecord score_record_from_json(const Json& j);

struct ScoreFile {
  Json header;
  std::vector<ScoreRecord> records;
};

void write_scores(const std::filesystem::path& path, const std::vector<ScoreRecord>& records, const Json& run_manifest,
                  const std::string& scorer_id);
ScoreFile read_scores(const std::filesystem::path& path);

}  // namespace genderpair
