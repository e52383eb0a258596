#include <doctest.h>

#include <map>
#include <set>

#include "genderpair/error.hpp"
#include "genderpair/promptgen.hpp"
#include "genderpair/text.hpp"
#include "support/support.hpp"

using namespace genderpair;

using gptest::find_target;
using gptest::find_triplet;

TEST_CASE("six configurations of the example triplets match the golden prompts") {
  const auto& reg = gptest::reference_registry();
  auto golden = gptest::lines_of(gptest::slurp(std::string(GP_GOLDEN_DIR) + "/example_prompts.txt"));
  REQUIRE(golden.size() == 18);
  std::map<std::string, std::pair<GroupId, std::string>> examples = {
      {"male", {GroupId::Group1, "shitty"}}, {"female", {GroupId::Group2, "silly"}}, {"nonbinary", {GroupId::Group3, "ashamed"}}};
  for (const auto& line : golden) {
    auto parts = text::split(line, '\t');
    REQUIRE(parts.size() == 3);
    auto [g, biased] = examples.at(parts[0]);
    auto cfg = PairConfiguration::from_index(std::stoi(parts[1]));
    auto p = render_prompt(find_target(reg, g, parts[0]), find_triplet(reg, g, biased), cfg, {reg.version()});
    CHECK(p.text == parts[2]);
  }
}

TEST_CASE("configuration table") {
  CHECK(PairConfiguration::from_index(1) == PairConfiguration{1, PairShape::AttributeSet, true});
  CHECK(PairConfiguration::from_index(2) == PairConfiguration{2, PairShape::AttributeSet, false});
  CHECK(PairConfiguration::from_index(3) == PairConfiguration{3, PairShape::PhrasePairsTargetFirst, true});
  CHECK(PairConfiguration::from_index(6) == PairConfiguration{6, PairShape::PhrasePairsDescriptorFirst, false});
  CHECK_THROWS_AS(PairConfiguration::from_index(0), Error);
  CHECK_THROWS_AS(PairConfiguration::from_index(7), Error);
}

TEST_CASE("render rejects a target and triplet from different groups") {
  const auto& reg = gptest::reference_registry();
  try {
    render_prompt(reg.benchmark_targets(GroupId::Group1)[0], reg.triplets(GroupId::Group2)[0],
                  PairConfiguration::from_index(1));
    FAIL("expected GroupMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::GroupMismatch);
  }
}

TEST_CASE("full stream count equals |targets| x |pairs| x 6 per group") {
  const auto& reg = gptest::reference_registry();
  for (GroupId g : kAllGroups) {
    BenchmarkSelection sel;
    sel.groups = {g};
    BenchmarkStream s(reg, sel);
    size_t n = 0;
    std::set<std::string> ids;
    while (auto p = s.next()) {
      ++n;
      ids.insert(p->prompt_id);
      CHECK(p->group == g);
    }
    size_t naive = reg.benchmark_targets(g).size() * reg.triplets(g).size() * 6;
    CHECK(n == naive);
    CHECK(ids.size() == n);
    CHECK(s.expected_count() == n);
  }
}

TEST_CASE("prompt ids are stable and variant specific") {
  const auto& reg = gptest::reference_registry();
  const auto& t = reg.benchmark_targets(GroupId::Group1)[0];
  const auto& tr = reg.triplets(GroupId::Group1)[0];
  auto cfg = PairConfiguration::from_index(3);
  auto a = make_prompt_id(reg.version(), t, tr, cfg, PromptVariant::Type1);
  CHECK(a == make_prompt_id(reg.version(), t, tr, cfg, PromptVariant::Type1));
  CHECK(a != make_prompt_id(reg.version(), t, tr, cfg, PromptVariant::Type2));
  CHECK(a != make_prompt_id("other-version", t, tr, cfg, PromptVariant::Type1));
  CHECK(a.rfind("g1-c3-", 0) == 0);
}

TEST_CASE("seeded sample is deterministic, ordered and of the requested size") {
  const auto& reg = gptest::reference_registry();
  BenchmarkSelection sel;
  sel.sample = SampleSpec{500, 42};
  auto a = generate_benchmark(reg, sel);
  auto b = generate_benchmark(reg, sel);
  REQUIRE(a.size() == 500);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].prompt_id == b[i].prompt_id);
  sel.sample->seed = 43;
  auto c = generate_benchmark(reg, sel);
  size_t same = 0;
  for (size_t i = 0; i < a.size(); ++i) same += a[i].prompt_id == c[i].prompt_id;
  CHECK(same < 50);
  std::set<int> groups;
  for (const auto& p : a) groups.insert(group_number(p.group));
  CHECK(groups.size() == 3);
}

TEST_CASE("limit truncates and empty selections are refused") {
  const auto& reg = gptest::reference_registry();
  BenchmarkSelection sel;
  sel.limit = 10;
  CHECK(generate_benchmark(reg, sel).size() == 10);
  BenchmarkSelection empty;
  empty.configs = {};
  CHECK_THROWS_AS(BenchmarkStream(reg, empty), Error);
}

TEST_CASE("variants differ in wording and mark") {
  const auto& reg = gptest::reference_registry();
  const auto& t = reg.benchmark_targets(GroupId::Group2)[0];
  const auto& tr = reg.triplets(GroupId::Group2)[0];
  for (int c = 1; c <= 6; ++c) {
    auto cfg = PairConfiguration::from_index(c);
    auto p1 = render_prompt(t, tr, cfg, {reg.version(), PromptVariant::Type1});
    auto p2 = render_prompt(t, tr, cfg, {reg.version(), PromptVariant::Type2});
    auto p3 = render_prompt(t, tr, cfg, {reg.version(), PromptVariant::Type3});
    CHECK(p1.text != p2.text);
    CHECK(p3.text.find("'[ ]'") != std::string::npos);
    CHECK(p1.text.find("'{ }'") != std::string::npos);
    for (const auto* p : {&p1, &p2, &p3}) {
      CHECK(p->text.find(tr.biased) != std::string::npos);
      CHECK(p->text.find(tr.anti_biased) != std::string::npos);
      CHECK(p->text.find(t.surface) != std::string::npos);
    }
  }
  CHECK(marker_for(PromptVariant::Type3).open == '[');
  CHECK(marker_for(PromptVariant::Type2).open == '{');
}

TEST_CASE("index lists") {
  CHECK(parse_index_list("1-6", 1, 6) == std::vector<int>{1, 2, 3, 4, 5, 6});
  CHECK(parse_index_list("2-4,6", 1, 6) == std::vector<int>{2, 3, 4, 6});
  CHECK(parse_index_list("3,1", 1, 3) == std::vector<int>{1, 3});
  CHECK_THROWS_AS(parse_index_list("0-2", 1, 6), Error);
  CHECK_THROWS_AS(parse_index_list("x", 1, 6), Error);
}

TEST_CASE("prompt file round trip") {
  const auto& reg = gptest::reference_registry();
  gptest::TempDir dir;
  BenchmarkSelection sel;
  sel.sample = SampleSpec{40, 1};
  BenchmarkStream s(reg, sel);
  auto n = write_prompts(dir / "p.jsonl", prompts_header(reg, sel), s);
  auto f = read_prompts(dir / "p.jsonl");
  CHECK(n == 40);
  REQUIRE(f.prompts.size() == 40);
  auto direct = generate_benchmark(reg, sel);
  for (size_t i = 0; i < direct.size(); ++i) {
    CHECK(f.prompts[i].text == direct[i].text);
    CHECK(f.find(direct[i].prompt_id) != nullptr);
  }
  CHECK(f.header["registry_version"] == reg.version());
}
