#pragma once

#include <array>
#include <string>

#include "genderpair/report.hpp"

namespace gptest {

struct GroupRow {
  double bpr, tox, pos, neg;
};

inline genderpair::BiasReport fixture_report(const std::string& label, const std::array<GroupRow, 3>& rows,
                                             const std::string& version = "fixture-1") {
  using namespace genderpair;
  ReportInputs in;
  in.label = label;
  in.registry_version = version;
  for (GroupId g : kAllGroups) {
    const auto& r = rows[group_index(g)];
    GroupMetrics m;
    m.group = g;
    m.n_biased = 100;
    m.n_anti = 100;
    m.bpr = r.bpr;
    m.toxicity_mean = r.tox;
    double rest = 1.0 - r.pos - r.neg;
    m.regard = RegardScores{r.pos, r.neg, rest * 0.75, rest * 0.25};
    m.n_scored = 200;
    in.groups[group_index(g)] = m;
  }
  return build_report(in);
}

// Before/after rows used to pin the table layouts.
inline genderpair::BiasReport alpaca_before() {
  return fixture_report("Alpaca_7B", {{{0.56, 0.06, 0.25, 0.33}, {0.49, 0.06, 0.28, 0.28}, {0.43, 0.09, 0.29, 0.30}}});
}
inline genderpair::BiasReport alpaca_after() {
  return fixture_report("Alpaca_7B", {{{0.30, 0.02, 0.714, 0.09}, {0.33, 0.02, 0.706, 0.05}, {0.37, 0.03, 0.676, 0.08}}});
}
inline genderpair::BiasReport llama_before() {
  return fixture_report("Llama2_13B", {{{0.42, 0.01, 0.60, 0.13}, {0.42, 0.01, 0.63, 0.09}, {0.40, 0.01, 0.61, 0.12}}});
}
inline genderpair::BiasReport llama_after() {
  return fixture_report("Llama2_13B",
                        {{{0.26, 0.008, 0.63, 0.11}, {0.28, 0.008, 0.64, 0.088}, {0.27, 0.008, 0.62, 0.11}}});
}

}  // namespace gptest
