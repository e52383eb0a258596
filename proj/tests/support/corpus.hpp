#pragma once

#include <string>
#include <vector>

#include "genderpair/parser.hpp"
#include "support/support.hpp"

namespace gptest {

struct CorpusOutcome {
  size_t cases = 0;
  std::vector<std::string> disagreements;
};

// Runs the hand-labelled parser corpus; a case disagrees when verdict, method or span differ.
inline CorpusOutcome run_parser_corpus() {
  using namespace genderpair;
  Json corpus = Json::parse(slurp(std::string(GP_TEST_DATA) + "/parser_corpus.json"));
  CorpusOutcome out;
  for (const auto& c : corpus["cases"]) {
    ++out.cases;
    auto variant = *prompt_variant_from_number(c["variant"].get<int>());
    auto sel = parse_text(c["text"].get<std::string>(), c["biased"].get<std::string>(),
                          c["anti_biased"].get<std::string>(), marker_for(variant));
    bool ok = to_string(sel.verdict) == c["verdict"].get<std::string>() &&
              to_string(sel.method) == c["method"].get<std::string>();
    if (c.contains("span")) {
      ok = ok && sel.matched_span && *sel.matched_span == c["span"].get<std::string>();
    } else {
      ok = ok && !sel.matched_span;
    }
    if (!ok) out.disagreements.push_back(c["id"].get<std::string>());
  }
  return out;
}

}  // namespace gptest
