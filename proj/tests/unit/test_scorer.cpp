#include <doctest.h>

#include <thread>

#include <httplib.h>

#include "genderpair/error.hpp"
#include "genderpair/pipeline.hpp"
#include "genderpair/scorer.hpp"
#include "support/scorer_contract.hpp"
#include "support/support.hpp"

using namespace genderpair;
using gptest::Json;

namespace {

StubLexicon contract_lexicon() {
  StubLexicon lx;
  lx.toxic = {{"hateful", 0.8}, {"cruel", 0.6}};
  lx.positive = {"kind", "gentle"};
  lx.negative = {"cruel", "hateful"};
  return lx;
}

std::string join_checks(const std::vector<std::string>& v) {
  std::string s;
  for (const auto& x : v) s += x + "; ";
  return s;
}

}  // namespace

TEST_CASE("contract: in-process stub") {
  StubScorer stub(contract_lexicon());
  auto bad = gptest::scorer_contract(stub);
  CAPTURE(join_checks(bad));
  CHECK(bad.empty());
}

TEST_CASE("contract: HTTP client against the stub server") {
  auto stub = std::make_shared<StubScorer>(contract_lexicon());
  StubScorerServer server(stub);
  server.start(0);
  HttpScorer http(server.url());
  auto bad = gptest::scorer_contract(http);
  CAPTURE(join_checks(bad));
  CHECK(bad.empty());
  std::vector<std::string> texts = {"kind words", "hateful words"};
  CHECK(http.score(texts) == stub->score(texts));
  server.stop();
}

TEST_CASE("stub formula") {
  StubScorer s(contract_lexicon());
  auto none = s.score_one("the weather");
  CHECK(none.toxicity == doctest::Approx(0.05));
  CHECK(none.regard == RegardScores{0.1, 0.1, 0.7, 0.1});
  auto mixed = s.score_one("Kind, kind and cruel.");
  CHECK(mixed.toxicity == doctest::Approx(0.6));
  CHECK(mixed.regard.positive == doctest::Approx(0.9 * 2.0 / 3.0));
  CHECK(mixed.regard.negative == doctest::Approx(0.9 * 1.0 / 3.0));
  CHECK(mixed.regard.neutral == doctest::Approx(0.05));
  CHECK(s.score_one("hateful and cruel").toxicity == doctest::Approx(0.8));
  CHECK(s.score_one("kindness").regard == RegardScores{0.1, 0.1, 0.7, 0.1});
}

TEST_CASE("directional sanity") {
  StubScorer s(StubLexicon::from_registry(gptest::reference_registry()));
  auto pos = s.score_one("She is intelligent and confident.");
  auto neg = s.score_one("She is silly and emotional.");
  CHECK(pos.regard.positive > neg.regard.positive);
  CHECK(neg.regard.negative > pos.regard.negative);
}

TEST_CASE("server readiness and shutdown give ScorerUnavailable") {
  auto stub = std::make_shared<StubScorer>(contract_lexicon());
  StubScorerServer server(stub);
  server.start(0);
  server.set_ready(false);
  HttpScorer http(server.url());
  CHECK(http.info()["protocol"] == kScorerProtocol);
  try {
    http.score({"x"});
    FAIL("expected ScorerUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ScorerUnavailable);
  }
  server.set_ready(true);
  CHECK(http.score({"x"}).size() == 1);
  std::string url = server.url();
  server.stop();
  HttpScorer gone(url, std::chrono::seconds(2));
  try {
    gone.score({"x"});
    FAIL("expected ScorerUnavailable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::ScorerUnavailable);
  }
}

TEST_CASE("protocol violations") {
  httplib::Server srv;
  std::string protocol = "genderpair-scorer/2";
  Json score_body = {{"toxicity", {0.1}}, {"regard", Json::array()}};
  srv.Get("/info", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(Json({{"protocol", protocol}}).dump(), "application/json");
  });
  srv.Post("/score", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content(score_body.dump(), "application/json");
  });
  int port = srv.bind_to_any_port("127.0.0.1");
  std::thread t([&] { srv.listen_after_bind(); });
  srv.wait_until_ready();
  std::string url = "http://127.0.0.1:" + std::to_string(port);
  {
    HttpScorer wrong_major(url);
    try {
      wrong_major.score({"x"});
      FAIL("expected ScorerProtocolViolation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ScorerProtocolViolation);
    }
  }
  protocol = "genderpair-scorer/1";
  {
    HttpScorer misaligned(url);
    try {
      misaligned.score({"x"});
      FAIL("expected ScorerProtocolViolation");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::ScorerProtocolViolation);
    }
  }
  srv.stop();
  t.join();
}

TEST_CASE("decode and encode") {
  std::vector<TextScore> v = {{0.2, {0.5, 0.2, 0.2, 0.1}}};
  CHECK(decode_score_response(encode_score_response(v), 1) == v);
  CHECK_THROWS_AS(decode_score_response(encode_score_response(v), 2), Error);
  Json out_of_range = encode_score_response({{1.5, {0.5, 0.2, 0.2, 0.1}}});
  CHECK_THROWS_AS(decode_score_response(out_of_range, 1), Error);
  CHECK(utf8_length("☃ab") == 3);
}

TEST_CASE("batch scoring records invalid texts per record") {
  StubScorer s(contract_lexicon());
  std::vector<std::string> texts(130, "kind");
  texts[5] = "";
  texts[70] = std::string(kMaxScoreTextChars + 1, 'z');
  auto out = score_texts(texts, s);
  REQUIRE(out.size() == 130);
  CHECK(out[5].error == ErrorCode::InvalidInput);
  CHECK(out[70].error == ErrorCode::InvalidInput);
  size_t ok = 0;
  for (const auto& o : out) ok += o.score.has_value();
  CHECK(ok == 128);
}

namespace {

struct FlakyScorer : ScorerClient {
  StubScorer inner{StubLexicon{}};
  int fail_first = 0;
  int calls = 0;
  std::vector<TextScore> score(const std::vector<std::string>& texts) override {
    if (calls++ < fail_first) throw Error(ErrorCode::ScorerUnavailable, "warming up");
    return inner.score(texts);
  }
  Json info() override { return inner.info(); }
  std::string scorer_id() override { return "flaky"; }
};

}  // namespace

TEST_CASE("unavailable batches are retried, then recorded, and total outage throws") {
  ScoreOptions opts;
  opts.sleep = [](std::chrono::milliseconds) {};
  opts.max_retries = 2;
  FlakyScorer warm;
  warm.fail_first = 2;
  auto out = score_texts({"a", "b"}, warm, opts);
  CHECK(out[0].score.has_value());
  FlakyScorer down;
  down.fail_first = 1000;
  CHECK_THROWS_AS(score_texts({"a", "b"}, down, opts), Error);
}

TEST_CASE("scores file round trip") {
  gptest::TempDir dir;
  ScoreRecord a{"p1", 0, GroupId::Group2, TextScore{0.1, {0.4, 0.3, 0.2, 0.1}}, std::nullopt, ""};
  ScoreRecord b{"p1", 1, GroupId::Group2, std::nullopt, ErrorCode::InvalidInput, "empty"};
  write_scores(dir / "s.jsonl", {a, b}, Json{{"registry_version", "v"}}, "stub");
  auto f = read_scores(dir / "s.jsonl");
  REQUIRE(f.records.size() == 2);
  CHECK(f.records[0].score == a.score);
  CHECK(f.records[1].error == ErrorCode::InvalidInput);
  CHECK(f.header["scorer"] == "stub");
}
