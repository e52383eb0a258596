// Acceptance suite: one PASS/FAIL line per criterion. Usage: acceptance <genderpair-cli>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <fmt/format.h>

#include "genderpair/debias.hpp"
#include "genderpair/error.hpp"
#include "genderpair/metrics.hpp"
#include "genderpair/mock_model.hpp"
#include "genderpair/pipeline.hpp"
#include "genderpair/promptgen.hpp"
#include "genderpair/report.hpp"
#include "genderpair/text.hpp"
#include "oracle/naive.hpp"
#include "support/corpus.hpp"
#include "support/debias_scan.hpp"
#include "support/fixtures.hpp"
#include "support/parser_property.hpp"
#include "support/support.hpp"
#include "support/synthetic.hpp"

using namespace genderpair;
using gptest::Json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

// Pinned tolerances and budgets.
constexpr double kGenerateBudgetSeconds = 60.0;
constexpr double kE2eBudgetSeconds = 120.0;
constexpr double kOracleTolerance = 1e-9;
constexpr size_t kOracleTrials = 1000;
constexpr size_t kOracleMaxRecords = 200;
constexpr size_t kPropertyTrials = 10000;
constexpr size_t kStereoPairs = 1000;
constexpr double kStereoSumTolerance = 1e-12;
constexpr double kStereoScaleTolerance = 1e-9;
constexpr double kRobustnessTolerance = 0.02;
constexpr size_t kE2eSample = 500;
constexpr int kE2eReps = 5;
constexpr size_t kRobustnessSample = 20000;
constexpr int kRobustnessReps = 3;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string g_cli;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int sh(const std::string& cmd) {
  int rc = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

size_t record_lines(const fs::path& p) {
  auto lines = gptest::lines_of(gptest::slurp(p));
  return lines.empty() ? 0 : lines.size() - 1;
}

Outcome prompt_counts() {
  gptest::TempDir dir;
  std::array<size_t, 3> want = {31872, 31872, 40338};
  std::array<size_t, 3> got{};
  auto t0 = Clock::now();
  for (int g = 1; g <= 3; ++g) {
    fs::path out = dir / fmt::format("g{}.jsonl", g);
    int rc = sh(fmt::format("{} bench generate --registry {} --groups {} --out {}", q(g_cli), q(GP_REGISTRY), g, q(out)));
    if (rc != 0) return {false, fmt::format("generate for group {} exited {}", g, rc)};
    got[g - 1] = record_lines(out);
  }
  double s = seconds_since(t0);
  bool ok = got == want && s < kGenerateBudgetSeconds;
  return {ok, fmt::format("{} / {} / {} prompts in {:.1f} s (limit {:.0f} s)", got[0], got[1], got[2], s,
                          kGenerateBudgetSeconds)};
}

Outcome template_fidelity() {
  const auto& reg = gptest::reference_registry();
  auto golden = gptest::lines_of(gptest::slurp(std::string(GP_GOLDEN_DIR) + "/example_prompts.txt"));
  std::map<std::string, std::pair<GroupId, std::string>> examples = {
      {"male", {GroupId::Group1, "shitty"}}, {"female", {GroupId::Group2, "silly"}}, {"nonbinary", {GroupId::Group3, "ashamed"}}};
  size_t match = 0;
  std::set<int> configs;
  for (const auto& line : golden) {
    auto parts = text::split(line, '\t');
    if (parts.size() != 3) return {false, "malformed golden line"};
    auto [g, biased] = examples.at(parts[0]);
    int cfg = std::stoi(parts[1]);
    configs.insert(cfg);
    auto p = render_prompt(gptest::find_target(reg, g, parts[0]), gptest::find_triplet(reg, g, biased),
                           PairConfiguration::from_index(cfg), {reg.version()});
    match += p.text == parts[2];
  }
  bool ok = golden.size() == 18 && match == golden.size() && configs.size() == 6;
  return {ok, fmt::format("{}/{} golden prompts equal across {} configurations", match, golden.size(), configs.size())};
}

Outcome sigma_convention() {
  std::array<double, 3> a = {0.60, 0.63, 0.61};
  std::array<double, 3> b = {0.58, 0.61, 0.50};
  double sa = round2(cross_group_sigma(a));
  double sb = round2(cross_group_sigma(b));
  return {sa == 0.01 && sb == 0.05, fmt::format("(0.60, 0.63, 0.61) -> {:.2f}, (0.58, 0.61, 0.50) -> {:.2f}", sa, sb)};
}

Outcome metric_oracle() {
  std::mt19937_64 rng(20240611);
  double worst = 0.0;
  size_t bad = 0;
  std::string first;
  for (size_t t = 0; t < kOracleTrials; ++t) {
    size_t n = std::uniform_int_distribution<size_t>(1, kOracleMaxRecords)(rng);
    auto run = gptest::synthetic_run(rng, n);
    auto after = gptest::synthetic_run(rng, n);
    auto c = gptest::compare_with_oracle(run, kOracleTolerance);
    auto d = gptest::compare_reduction_with_oracle(run, after, kOracleTolerance);
    auto st = gptest::compare_stereo_with_oracle(rng, n, kOracleTolerance);
    worst = std::max({worst, c.max_abs_diff, d.max_abs_diff, st.max_abs_diff});
    for (const auto* m : {&c.mismatches, &d.mismatches, &st.mismatches}) {
      if (m->empty()) continue;
      if (first.empty()) first = m->front();
    }
    bad += !c.mismatches.empty() || !d.mismatches.empty() || !st.mismatches.empty();
  }
  return {bad == 0, fmt::format("{} synthetic runs (group metrics, sigma, reduction and stereo deltas), {} mismatching, max |diff| {:.3g} (tol {:.0e}){}", kOracleTrials, bad,
                                worst, kOracleTolerance, first.empty() ? "" : "; first: " + first)};
}

Outcome parser_agreement() {
  auto corpus = gptest::run_parser_corpus();
  auto prop = gptest::parser_round_trip(kPropertyTrials, 31337);
  bool ok = corpus.cases == 50 && corpus.disagreements.empty() && prop.trials == kPropertyTrials && prop.failures == 0;
  return {ok, fmt::format("corpus {}/{} agree; round trip {}/{} trials pass{}", corpus.cases - corpus.disagreements.size(),
                          corpus.cases, prop.trials - prop.failures, prop.trials,
                          prop.first_failure.empty() ? "" : "; first failure: " + prop.first_failure)};
}

// Designed selection rates: a group-1 response is biased on repetitions 0-1, group 2 on 0, group 3 on 0-2.
Json e2e_mock_script() {
  return {{"schema", "genderpair-mock/1"},
          {"rules", Json::array({{{"when", {{"groups", {1}}, {"repetitions", {0, 1}}}}, {"respond", "biased"}},
                                 {{"when", {{"groups", {2}}, {"repetitions", {0}}}}, {"respond", "biased"}},
                                 {{"when", {{"groups", {3}}, {"repetitions", {0, 1, 2}}}}, {"respond", "biased"}}})},
          {"default", {{"respond", "anti"}}}};
}

bool e2e_pipeline(const fs::path& dir, int parallelism, const fs::path& prompts, const fs::path& script) {
  std::string cli = q(g_cli);
  std::vector<std::string> steps = {
      fmt::format("{} bench run --prompts {} --endpoint mock:{} --reps {} --parallelism {} --out {}", cli, q(prompts),
                  script.string(), kE2eReps, parallelism, q(dir / "run.jsonl")),
      fmt::format("{} bench parse --run {} --prompts {} --out {}", cli, q(dir / "run.jsonl"), q(prompts),
                  q(dir / "parsed.jsonl")),
      fmt::format("{} bench score --run {} --scorer stub --registry {} --out {}", cli, q(dir / "run.jsonl"),
                  q(GP_REGISTRY), q(dir / "scores.jsonl")),
      fmt::format("{} bench metrics --parsed {} --scores {} --label mock --out {}", cli, q(dir / "parsed.jsonl"),
                  q(dir / "scores.jsonl"), q(dir / "report.json")),
      fmt::format("{} report emit {} --format markdown --out {}", cli, q(dir / "report.json"), q(dir / "report.md")),
  };
  for (const auto& s : steps) {
    if (sh(s) != 0) return false;
  }
  return true;
}

Outcome e2e_mock() {
  gptest::TempDir dir;
  fs::path script = dir / "mock.json";
  gptest::write_file(script, e2e_mock_script().dump(2));
  auto t0 = Clock::now();
  fs::path prompts = dir / "prompts.jsonl";
  if (sh(fmt::format("{} bench generate --registry {} --sample {} --seed 7 --out {}", q(g_cli), q(GP_REGISTRY),
                     kE2eSample, q(prompts))) != 0) {
    return {false, "generate failed"};
  }
  fs::create_directories(dir / "p1");
  fs::create_directories(dir / "p8");
  if (!e2e_pipeline(dir / "p1", 1, prompts, script)) return {false, "pipeline failed at parallelism 1"};
  double s = seconds_since(t0);
  if (!e2e_pipeline(dir / "p8", 8, prompts, script)) return {false, "pipeline failed at parallelism 8"};

  bool identical = gptest::slurp(dir / "p1" / "report.json") == gptest::slurp(dir / "p8" / "report.json") &&
                   gptest::slurp(dir / "p1" / "report.md") == gptest::slurp(dir / "p8" / "report.md");
  auto report = read_report(dir / "p1" / "report.json");
  std::array<double, 3> designed = {2.0 / 5.0, 1.0 / 5.0, 3.0 / 5.0};
  auto pf = read_prompts(prompts);
  std::array<size_t, 3> per_group{};
  for (const auto& p : pf.prompts) ++per_group[group_index(p.group)];
  bool exact = true;
  std::string bprs;
  for (GroupId g : kAllGroups) {
    const auto& m = report.groups[group_index(g)];
    size_t gi = group_index(g);
    bool ok = m && m->bpr && *m->bpr == designed[gi] && m->n_biased + m->n_anti == per_group[gi] * kE2eReps &&
              m->n_excluded == 0;
    exact = exact && ok;
    bprs += fmt::format("{}{:.2f}", bprs.empty() ? "" : "/", m && m->bpr ? *m->bpr : -1.0);
  }
  bool ok = pf.prompts.size() == kE2eSample && exact && identical && s < kE2eBudgetSeconds;
  return {ok, fmt::format("{} prompts x {} reps in {:.1f} s (limit {:.0f} s); BPR {} vs designed 0.40/0.20/0.60 ({}); "
                          "parallelism 1 vs 8 reports {}",
                          pf.prompts.size(), kE2eReps, s, kE2eBudgetSeconds, bprs, exact ? "exact" : "differs",
                          identical ? "byte-identical" : "differ")};
}

Outcome stereo_delta_props() {
  std::mt19937_64 rng(4242);
  std::uniform_real_distribution<double> lp(-3.0, 6.0);
  size_t sum_bad = 0, scale_bad = 0;
  for (size_t i = 0; i < kStereoPairs; ++i) {
    double a = std::pow(10.0, lp(rng)), b = std::pow(10.0, lp(rng)), k = std::pow(10.0, lp(rng));
    auto p = normalize_stereo_pair(a, b);
    auto s = normalize_stereo_pair(k * a, k * b);
    if (std::abs(p.normalized_more + p.normalized_less - 1.0) > kStereoSumTolerance) ++sum_bad;
    if (std::abs(p.delta - s.delta) > kStereoScaleTolerance ||
        std::abs(p.delta - oracle::naive_stereo_delta(a, b)) > kStereoScaleTolerance) {
      ++scale_bad;
    }
  }
  double sym = normalize_stereo_pair(17.5, 17.5).delta;
  bool ok = sum_bad == 0 && scale_bad == 0 && sym == 0.0;
  return {ok, fmt::format("{} pairs: {} sum violations, {} scale violations; symmetric pair delta {}", kStereoPairs,
                          sum_bad, scale_bad, sym)};
}

Outcome debias_checks() {
  const auto& reg = gptest::reference_registry();
  auto gen = generate_debias_prompts(reg, {});
  std::array<size_t, 3> seen{};
  for (const auto& p : gen.prompts) ++seen[group_index(p.group)];
  bool counts_ok = gen.expected[0] == 4200;
  for (GroupId g : kAllGroups) {
    auto c = reg.counts(g);
    size_t naive = (c.identities + c.titles + c.pronouns + 50) * 50;
    counts_ok = counts_ok && seen[group_index(g)] == naive && gen.expected[group_index(g)] == naive;
  }

  std::vector<std::pair<std::string, std::string>> rows;
  for (const auto& p : gen.prompts) {
    // Every tenth response leaks a biased word of its group so the audit has something to catch.
    bool leak = std::hash<std::string>{}(p.record_id) % 10 == 0;
    std::string text = "The {" + p.target.surface + "} is {" + p.anti_descriptor + "}.";
    if (leak) text += " Some say " + reg.triplets(p.group)[0].biased + ".";
    rows.emplace_back(p.record_id, text);
  }
  auto records = ingest_responses(gen.prompts, rows).records;
  StubScorer flat{StubLexicon{}};
  auto audited = audit_records(records, reg, flat);
  gptest::TempDir dir;
  size_t hits = 0, lines_n = 0;
  bool exported = false;
  try {
    auto res = export_finetune(audited.records, reg, {}, dir / "d.jsonl", dir / "c.json");
    exported = res.examples > 0;
    for (const auto& l : gptest::lines_of(gptest::slurp(dir / "d.jsonl"))) {
      Json j = Json::parse(l);
      auto g = *group_from_number(j["group"].get<int>());
      hits += gptest::scan_biased_hits(reg, g, j["instruction"].get<std::string>()) +
              gptest::scan_biased_hits(reg, g, j["output"].get<std::string>());
      ++lines_n;
    }
  } catch (const Error& e) {
    return {false, fmt::format("export failed: {}", e.what())};
  }

  auto skewed = records;
  for (auto& r : skewed)
    if (r.prompt.group == GroupId::Group1) r.response += " Truly kind.";
  StubLexicon lx;
  lx.positive = {"kind"};
  StubScorer leaning(lx);
  auto skew_audit = audit_records(skewed, reg, leaning);
  bool refused = false;
  try {
    export_finetune(skew_audit.records, reg, {}, dir / "s.jsonl", dir / "s.json");
  } catch (const Error& e) {
    refused = e.code() == ErrorCode::ParityUnverified;
  }
  bool ok = counts_ok && exported && hits == 0 && audited.rejected > 0 && refused;
  return {ok, fmt::format("counts {}/{}/{} (G1 expected 4200); exported {} examples with {} biased hits after {} "
                          "rejections; skewed parity sigma {:.3f} export {}",
                          seen[0], seen[1], seen[2], lines_n, hits, audited.rejected,
                          skew_audit.parity.sigma.value_or(-1.0), refused ? "refused" : "NOT refused")};
}

std::array<std::optional<GroupMetrics>, 3> run_variant(PromptVariant v, const fs::path& dir) {
  const auto& reg = gptest::reference_registry();
  BenchmarkSelection sel;
  sel.variant = v;
  sel.sample = SampleSpec{kRobustnessSample, 11};
  PromptFile pf;
  pf.prompts = generate_benchmark(reg, sel);
  for (size_t i = 0; i < pf.prompts.size(); ++i) pf.by_id.emplace(pf.prompts[i].prompt_id, i);
  Json script = {{"schema", "genderpair-mock/1"},
                 {"rules", Json::array({{{"when", {{"bucket", {{"salt", "robust"}, {"modulo", 100}, {"below", 40}}}}},
                                         {"respond", "biased"}}})},
                 {"default", {{"respond", "anti"}}}};
  MockModel model(MockScript::from_json(script));
  auto manifest = make_run_manifest(pf, model, gptest::mock_params(), kRobustnessReps, true);
  RunOptions ro;
  ro.repetitions = kRobustnessReps;
  ro.fixed_clock = true;
  fs::path log = dir / fmt::format("run{}.jsonl", static_cast<int>(v));
  run_benchmark(pf.prompts, model, manifest, ro, log);
  auto run = read_run_log(log);
  auto parsed = parse_run(run, pf);
  StubScorer scorer(StubLexicon::from_registry(reg));
  auto scores = score_run(run, scorer);
  return aggregate_metrics(parsed.selections, scores, nullptr, nullptr);
}

Outcome robustness() {
  gptest::TempDir dir;
  std::vector<std::array<std::optional<GroupMetrics>, 3>> runs;
  for (auto v : {PromptVariant::Type1, PromptVariant::Type2, PromptVariant::Type3}) runs.push_back(run_variant(v, dir.path()));
  double worst = 0.0;
  std::string where;
  bool complete = true;
  for (GroupId g : kAllGroups) {
    for (MetricId id : {MetricId::Bpr, MetricId::Toxicity, MetricId::RegardPositive, MetricId::RegardNegative,
                        MetricId::RegardNeutral, MetricId::RegardOther}) {
      std::vector<double> vals;
      for (const auto& r : runs) {
        auto v = r[group_index(g)] ? metric_value(*r[group_index(g)], id) : std::nullopt;
        if (!v) {
          complete = false;
          continue;
        }
        vals.push_back(*v);
      }
      if (vals.size() != 3) continue;
      auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
      if (*hi - *lo > worst) {
        worst = *hi - *lo;
        where = fmt::format("G{} {}", group_number(g), to_string(id));
      }
    }
  }
  bool ok = complete && worst <= kRobustnessTolerance;
  return {ok, fmt::format("variants 1/2/3 over {} prompts x {} reps: max spread {:.4f} at {} (tol {:.2f})",
                          kRobustnessSample, kRobustnessReps, worst, where.empty() ? "-" : where, kRobustnessTolerance)};
}

Outcome table_formatting() {
  auto golden = [](const std::string& n) { return gptest::slurp(std::string(GP_GOLDEN_DIR) + "/" + n); };
  std::vector<BiasReport> single = {gptest::llama_before()};
  std::vector<BiasReport> ranked = {gptest::alpaca_before(), gptest::llama_before()};
  std::vector<BiasReport> reduced = {compare_reports(gptest::alpaca_before(), gptest::alpaca_after()),
                                     compare_reports(gptest::llama_before(), gptest::llama_after())};
  int ok = (markdown_table(single) == golden("bias_table_single.md")) + (markdown_table(ranked) == golden("bias_table_ranked.md")) +
           (markdown_reduction_table(reduced) == golden("reduction_table.md"));
  return {ok == 3, fmt::format("{}/3 layout goldens equal; absolute model values are not reproduced offline", ok)};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fprintf(stderr, "usage: acceptance <genderpair-cli>\n");
    return 2;
  }
  g_cli = fs::absolute(argv[1]).string();
  std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"prompt counts", prompt_counts},
      {"template fidelity", template_fidelity},
      {"sigma convention", sigma_convention},
      {"metric oracle equivalence", metric_oracle},
      {"parser agreement", parser_agreement},
      {"end-to-end mock", e2e_mock},
      {"stereo delta", stereo_delta_props},
      {"debias forge", debias_checks},
      {"prompt-variant robustness", robustness},
      {"table formatting", table_formatting},
  };
  int failed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("threw: {}", e.what())};
    }
    failed += !o.pass;
    std::printf("%s [%zu] %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
