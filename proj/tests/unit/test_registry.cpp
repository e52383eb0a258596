#include <doctest.h>

#include "genderpair/error.hpp"
#include "genderpair/registry.hpp"
#include "support/support.hpp"

using namespace genderpair;
using gptest::Json;

namespace {

Json tiny_doc() {
  std::mt19937_64 rng(11);
  return gptest::random_registry_json(rng, 2, 3);
}

ErrorCode load_error(const Json& doc) {
  try {
    GenderTargetRegistry::from_json(doc);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::IoError;
}

}  // namespace

TEST_CASE("reference registry cardinalities") {
  const auto& reg = gptest::reference_registry();
  struct Row {
    GroupId g;
    size_t identities, titles, pronouns, names;
  };
  // Benchmark rows per group.
  for (Row r : {Row{GroupId::Group1, 5, 25, 4, 30}, Row{GroupId::Group2, 5, 25, 4, 30}, Row{GroupId::Group3, 10, 23, 18, 30}}) {
    auto c = reg.counts(r.g);
    CHECK(c.identities == r.identities);
    CHECK(c.titles == r.titles);
    CHECK(c.pronouns == r.pronouns);
    CHECK(c.names == r.names);
    CHECK(c.descriptor_pairs == 83);
    CHECK(c.biased_descriptors == 83);
    CHECK(c.anti_biased_descriptors == 83);
  }
  auto s = summarize(reg);
  CHECK(s.groups[0].expected_prompts == 31872);
  CHECK(s.groups[1].expected_prompts == 31872);
  CHECK(s.groups[2].expected_prompts == 40338);
  CHECK(s.total_targets() == 209);
}

TEST_CASE("canonical target order: identities, titles, pronouns, names by rank") {
  const auto& reg = gptest::reference_registry();
  for (GroupId g : kAllGroups) {
    auto t = reg.benchmark_targets(g);
    int last_kind = 0;
    int last_rank = 0;
    for (const auto& x : t) {
      int k = static_cast<int>(x.kind);
      CHECK(k >= last_kind);
      if (k != last_kind) last_rank = 0;
      last_kind = k;
      if (x.kind == TargetKind::Name) {
        REQUIRE(x.rank.has_value());
        CHECK(*x.rank > last_rank);
        last_rank = *x.rank;
      }
    }
  }
}

TEST_CASE("ranked names include the extended tier") {
  const auto& reg = gptest::reference_registry();
  for (GroupId g : kAllGroups) {
    auto names = reg.ranked_names(g);
    CHECK(names.size() >= 50);
    for (size_t i = 1; i < names.size(); ++i) CHECK(*names[i - 1].rank < *names[i].rank);
  }
}

TEST_CASE("loading errors") {
  SUBCASE("duplicate triplet") {
    Json doc = tiny_doc();
    doc["triplets"].push_back(doc["triplets"][0]);
    doc["manifest"]["groups"]["1"]["descriptor_pairs"] = 4;
    CHECK(load_error(doc) == ErrorCode::DuplicateTriplet);
  }
  SUBCASE("brace in a surface") {
    Json doc = tiny_doc();
    doc["targets"][0]["surface"] = "ma{le";
    CHECK(load_error(doc) == ErrorCode::BraceInSurface);
  }
  SUBCASE("wrong schema") {
    Json doc = tiny_doc();
    doc["schema"] = "genderpair-registry/9";
    CHECK(load_error(doc) == ErrorCode::SchemaViolation);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(GenderTargetRegistry::load("/nonexistent/registry.json"), Error);
  }
}

TEST_CASE("json round trip preserves the registry") {
  const auto& reg = gptest::reference_registry();
  auto again = GenderTargetRegistry::from_json(reg.to_json());
  CHECK(again.version() == reg.version());
  for (GroupId g : kAllGroups) {
    CHECK(again.counts(g) == reg.counts(g));
    auto a = again.all_targets(g);
    auto b = reg.all_targets(g);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
    auto ta = again.triplets(g);
    auto tb = reg.triplets(g);
    REQUIRE(ta.size() == tb.size());
    for (size_t i = 0; i < ta.size(); ++i) CHECK(ta[i] == tb[i]);
  }
}

TEST_CASE("reference registry is parity balanced") {
  auto w = validate_parity(gptest::reference_registry());
  CHECK(w.empty());
}
