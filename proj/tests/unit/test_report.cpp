#include <doctest.h>

#include "genderpair/error.hpp"
#include "genderpair/report.hpp"
#include "support/fixtures.hpp"
#include "support/support.hpp"

using namespace genderpair;
using gptest::Json;

namespace {

std::string golden(const std::string& name) { return gptest::slurp(std::string(GP_GOLDEN_DIR) + "/" + name); }

}  // namespace

TEST_CASE("value formatting") {
  CHECK(format_value(0.125) == "0.13");
  CHECK(format_value(-0.001) == "0.00");
  CHECK(format_value(std::nullopt) == "n/a");
  CHECK(format_reduction_cell(0.30, -0.26) == "0.30 (-0.26)");
  CHECK(format_reduction_cell(0.714, 0.464) == "0.71 (+0.46)");
  CHECK(format_reduction_cell(0.02, -0.0006) == "0.02 (-0.00)");
  CHECK(format_reduction_cell(0.5, 0.0) == "0.50 (±0.00)");
}

TEST_CASE("single-row table golden") {
  std::vector<BiasReport> r = {gptest::llama_before()};
  CHECK(markdown_table(r) == golden("bias_table_single.md"));
}

TEST_CASE("best and worst annotation golden") {
  std::vector<BiasReport> r = {gptest::alpaca_before(), gptest::llama_before()};
  CHECK(markdown_table(r) == golden("bias_table_ranked.md"));
}

TEST_CASE("reduction table golden") {
  std::vector<BiasReport> r = {compare_reports(gptest::alpaca_before(), gptest::alpaca_after()),
                               compare_reports(gptest::llama_before(), gptest::llama_after())};
  CHECK(markdown_reduction_table(r) == golden("reduction_table.md"));
  std::string md = emit_report(r, ReportFormat::Markdown);
  CHECK(md.find(golden("reduction_table.md")) != std::string::npos);
}

TEST_CASE("report json round trip") {
  auto r = compare_reports(gptest::alpaca_before(), gptest::alpaca_after());
  ParseStats ps;
  ps.total = 10;
  ps.by_verdict = {4, 4, 1, 1};
  ps.by_method = {8, 1, 1};
  r.parse_stats = ps;
  r.manifests.push_back(Json{{"registry_version", "fixture-1"}, {"model", "m"}});
  CHECK(bias_report_from_json(to_json(r)) == r);
  gptest::TempDir dir;
  write_report(dir / "r.json", r);
  CHECK(read_report(dir / "r.json") == r);
  gptest::write_file(dir / "bad.json", "{ nope");
  CHECK_THROWS_AS(read_report(dir / "bad.json"), Error);
}

TEST_CASE("registry version mismatch") {
  auto a = gptest::alpaca_before();
  auto b = gptest::fixture_report("other", {{{0.5, 0.1, 0.3, 0.3}, {0.5, 0.1, 0.3, 0.3}, {0.5, 0.1, 0.3, 0.3}}}, "fixture-2");
  std::vector<BiasReport> both = {a, b};
  try {
    check_registry_versions(both, false);
    FAIL("expected RegistryMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::RegistryMismatch);
  }
  CHECK_NOTHROW(check_registry_versions(both, true));
  CHECK_THROWS_AS(compare_reports(a, b), Error);
  CHECK_NOTHROW(compare_reports(a, b, true));
}

TEST_CASE("partial groups render n/a and warn") {
  ReportInputs in;
  in.label = "one";
  in.registry_version = "v";
  GroupMetrics m;
  m.group = GroupId::Group2;
  m.n_biased = 1;
  m.n_anti = 1;
  m.n_excluded = 5;
  m.bpr = 0.5;
  in.groups[1] = m;
  auto r = build_report(in);
  CHECK_FALSE(r.cross.sigma_positive.has_value());
  bool coverage = false, missing = false;
  for (const auto& w : r.warnings) {
    coverage |= w.find("excluded") != std::string::npos;
    missing |= w.find("group 1: no data") != std::string::npos;
  }
  CHECK(coverage);
  CHECK(missing);
  std::vector<BiasReport> rs = {r};
  std::string md = markdown_table(rs);
  CHECK(md.find("| one | n/a | 0.50 | n/a |") != std::string::npos);

  ReportInputs empty;
  CHECK_THROWS_AS(build_report(empty), Error);
  std::vector<BiasReport> none;
  CHECK_THROWS_AS(emit_report(none, ReportFormat::Csv), Error);
  BiasReport hollow;
  std::vector<BiasReport> hollow_list = {hollow};
  CHECK_THROWS_AS(emit_report(hollow_list, ReportFormat::Markdown), Error);
}

TEST_CASE("csv long format and machine jsonl") {
  std::vector<BiasReport> r = {compare_reports(gptest::llama_before(), gptest::llama_after())};
  auto csv = gptest::lines_of(emit_report(r, ReportFormat::Csv));
  CHECK(csv.at(0) == "label,group,metric,value");
  CHECK(std::find(csv.begin(), csv.end(), "Llama2_13B,1,bpr,0.26") != csv.end());
  CHECK(std::find(csv.begin(), csv.end(), "Llama2_13B,2,n_biased,100") != csv.end());
  size_t deltas = std::count_if(csv.begin(), csv.end(), [](const std::string& l) { return l.find("_delta,") != std::string::npos; });
  CHECK(deltas == r[0].reduction->cells.size());
  auto jl = gptest::lines_of(emit_report(r, ReportFormat::MachineJsonl));
  REQUIRE(jl.size() == 2);
  CHECK(Json::parse(jl[0])["schema"] == kReportSchema);
  CHECK(bias_report_from_json(Json::parse(jl[1])) == r[0]);
  CHECK(report_format_from_string("md") == ReportFormat::Markdown);
  CHECK_FALSE(report_format_from_string("xml").has_value());
}

TEST_CASE("plot series") {
  std::vector<BiasReport> r = {gptest::alpaca_before(), gptest::alpaca_after(), gptest::llama_before()};
  auto series = plot_series(r);
  REQUIRE(series.count("bpr"));
  auto lines = gptest::lines_of(series["bpr"]);
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "label,group1,group2,group3,mean");
  CHECK(lines[3].rfind("Llama2_13B,0.42,0.42,0.4,", 0) == 0);

  ReportInputs a;
  a.label = "bpr-only";
  a.registry_version = "v";
  GroupMetrics m;
  m.bpr = 0.5;
  a.groups[0] = m;
  ReportInputs b = a;
  b.label = "tox-only";
  b.groups[0]->bpr.reset();
  b.groups[0]->toxicity_mean = 0.2;
  std::vector<BiasReport> disjoint = {build_report(a), build_report(b)};
  auto s = plot_series(disjoint);
  CHECK(s.size() == 2);
  CHECK(gptest::lines_of(s["bpr"]).at(2) == "tox-only,,,,");
  CHECK(gptest::lines_of(s["toxicity"]).at(1) == "bpr-only,,,,");

  gptest::TempDir dir;
  auto files = write_plotdata(disjoint, dir / "plots");
  CHECK(files.size() == 2);
  CHECK(std::filesystem::exists(dir / "plots" / "series_bpr.csv"));
}
