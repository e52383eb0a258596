#include <doctest.h>

#include "genderpair/error.hpp"
#include "genderpair/mock_model.hpp"
#include "genderpair/parser.hpp"
#include "genderpair/pipeline.hpp"
#include "support/corpus.hpp"
#include "support/parser_property.hpp"
#include "support/support.hpp"

using namespace genderpair;
using gptest::Json;

TEST_CASE("hand-labelled corpus: full agreement") {
  auto r = gptest::run_parser_corpus();
  CHECK(r.cases == 50);
  std::string ids;
  for (const auto& id : r.disagreements) ids += id + " ";
  CAPTURE(ids);
  CHECK(r.disagreements.empty());
}

TEST_CASE("round-trip property over random registries") {
  auto r = gptest::parser_round_trip(2000, 99);
  CAPTURE(r.first_failure);
  CHECK(r.failures == 0);
}

TEST_CASE("span extraction: nesting, unclosed and stray marks") {
  auto s = extract_spans("a {b {c} d} e");
  REQUIRE(s.size() == 2);
  CHECK(s[0] == "c");
  CHECK(s[1] == "b {c} d");
  auto u = extract_spans("x {open to the end");
  REQUIRE(u.size() == 1);
  CHECK(u[0] == "open to the end");
  CHECK(extract_spans("stray } close").empty());
  auto sq = extract_spans("the [word] here", Marker{'[', ']'});
  REQUIRE(sq.size() == 1);
  CHECK(sq[0] == "word");
}

TEST_CASE("verdict rules") {
  CHECK(parse_text("a {silly} one", "silly", "intelligent").verdict == Verdict::Biased);
  CHECK(parse_text("a {intelligent} one", "silly", "intelligent").verdict == Verdict::AntiBiased);
  CHECK(parse_text("{silly} and {intelligent}", "silly", "intelligent").verdict == Verdict::Ambiguous);
  CHECK(parse_text("nothing marked", "silly", "intelligent").verdict == Verdict::Unparseable);
  auto fb = parse_text("she was silly today", "silly", "intelligent");
  CHECK(fb.verdict == Verdict::Biased);
  CHECK(fb.method == MatchMethod::UnmarkedFallback);
  ParseOptions strict;
  strict.fallback = false;
  auto st = parse_text("she was silly today", "silly", "intelligent", {}, strict);
  CHECK(st.verdict == Verdict::Unparseable);
  CHECK(st.method == MatchMethod::None);
  CHECK(parse_text("she was sillyish", "silly", "intelligent").verdict == Verdict::Unparseable);
}

TEST_CASE("run parsing joins on prompt id and counts failures") {
  const auto& reg = gptest::reference_registry();
  BenchmarkSelection sel;
  sel.sample = SampleSpec{8, 3};
  PromptFile pf;
  pf.prompts = generate_benchmark(reg, sel);
  for (size_t i = 0; i < pf.prompts.size(); ++i) pf.by_id.emplace(pf.prompts[i].prompt_id, i);
  MockModel model(MockScript::from_json(
      {{"schema", "genderpair-mock/1"},
       {"rules", Json::array({{{"when", {{"repetitions", {0}}}}, {"respond", "biased"}},
                              {{"when", {{"repetitions", {1}}}}, {"respond", "fail"}}})},
       {"default", {{"respond", "unmarked_anti"}}}}));
  gptest::TempDir dir;
  auto manifest = make_run_manifest(pf, model, gptest::mock_params(), 3, true);
  RunOptions ro;
  ro.repetitions = 3;
  ro.fixed_clock = true;
  ro.retry.max_retries = 0;
  run_benchmark(pf.prompts, model, manifest, ro, dir / "run.jsonl");
  auto run = read_run_log(dir / "run.jsonl");
  auto res = parse_run(run, pf);
  CHECK(res.stats.total == 24);
  CHECK(res.stats.response_failures == 8);
  CHECK(res.stats.count(Verdict::Biased) == 8);
  CHECK(res.stats.count(Verdict::AntiBiased) == 8);
  CHECK(res.stats.count(MatchMethod::UnmarkedFallback) == 8);

  write_parsed(dir / "parsed.jsonl", res, run.manifest, {});
  auto back = read_parsed(dir / "parsed.jsonl");
  REQUIRE(back.selections.size() == 24);
  CHECK(parse_stats_from_json(back.header["stats"]) == res.stats);
  CHECK(back.run_manifest.compatible_with(run.manifest));

  PromptFile missing;
  CHECK_THROWS_AS(parse_run(run, missing), Error);
}
