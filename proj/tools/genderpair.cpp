#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "genderpair/debias.hpp"
#include "genderpair/error.hpp"
#include "genderpair/metrics.hpp"
#include "genderpair/mock_model.hpp"
#include "genderpair/openai_client.hpp"
#include "genderpair/parser.hpp"
#include "genderpair/pipeline.hpp"
#include "genderpair/promptgen.hpp"
#include "genderpair/registry.hpp"
#include "genderpair/report.hpp"
#include "genderpair/runner.hpp"
#include "genderpair/scorer.hpp"

namespace gp = genderpair;
namespace fs = std::filesystem;
using gp::Json;

namespace {

std::string env_or(const char* name, const std::string& fallback = {}) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

fs::path out_path(const std::string& s) { return s == "-" ? fs::path("/dev/stdout") : fs::path(s); }
fs::path in_path(const std::string& s) { return s == "-" ? fs::path("/dev/stdin") : fs::path(s); }

void write_output(const std::string& out, const std::string& text) {
  if (out == "-") {
    std::cout << text;
    std::cout.flush();
  } else {
    gp::write_text_file(out, text);
  }
}

std::vector<gp::GroupId> parse_groups(const std::string& spec) {
  std::vector<gp::GroupId> out;
  for (int n : gp::parse_index_list(spec, 1, 3)) out.push_back(*gp::group_from_number(n));
  return out;
}

gp::PromptVariant parse_variant(int n) {
  auto v = gp::prompt_variant_from_number(n);
  if (!v) throw gp::Error(gp::ErrorCode::InvalidInput, fmt::format("prompt variant must be 1, 2 or 3, got {}", n));
  return *v;
}

void check_registry(const std::string& file_version, const gp::GenderTargetRegistry& registry, bool force) {
  if (!file_version.empty() && file_version != registry.version() && !force) {
    throw gp::Error(gp::ErrorCode::RegistryMismatch,
                    fmt::format("file built from registry {}, loaded registry is {}", file_version, registry.version()));
  }
}

// Either a scripted mock ("mock:<script.json>") or an HTTP chat-completions endpoint.
struct Endpoint {
  std::unique_ptr<gp::MockModel> mock;
  std::unique_ptr<gp::OpenAIClient> http;

  gp::ChatModel& chat() { return mock ? static_cast<gp::ChatModel&>(*mock) : *http; }
  gp::LogprobModel& logprobs() { return mock ? static_cast<gp::LogprobModel&>(*mock) : *http; }
  bool is_mock() const { return mock != nullptr; }
};

struct EndpointOptions {
  std::string endpoint;
  std::string model;
  std::string api_key;
  int timeout_s = 120;

  void add(CLI::App* sub) {
    sub->add_option("--endpoint", endpoint, "chat-completions base URL or mock:<script.json>");
    sub->add_option("--model", model, "model name sent to the endpoint");
    sub->add_option("--api-key", api_key, "API key (default from the environment)");
    sub->add_option("--timeout", timeout_s, "request timeout in seconds");
  }

  Endpoint open(const gp::GenerationParams& logprob_params = {}) const {
    Endpoint e;
    std::string url = endpoint.empty() ? env_or(gp::kEndpointEnv) : endpoint;
    if (url.empty()) {
      throw gp::Error(gp::ErrorCode::InvalidInput, fmt::format("no endpoint: pass --endpoint or set {}", gp::kEndpointEnv));
    }
    if (url.rfind("mock:", 0) == 0) {
      e.mock = std::make_unique<gp::MockModel>(gp::MockScript::load(url.substr(5)));
      return e;
    }
    gp::EndpointConfig cfg;
    cfg.base_url = url;
    cfg.api_key = api_key.empty() ? env_or(gp::kApiKeyEnv) : api_key;
    cfg.timeout = std::chrono::seconds(timeout_s);
    e.http = std::make_unique<gp::OpenAIClient>(cfg, logprob_params);
    return e;
  }

  std::string model_name(bool mock) const {
    std::string m = model.empty() ? env_or(gp::kModelEnv) : model;
    if (m.empty() && mock) m = "mock";
    if (m.empty()) throw gp::Error(gp::ErrorCode::InvalidInput, fmt::format("no model: pass --model or set {}", gp::kModelEnv));
    return m;
  }
};

// ---- registry ----

int registry_validate(const std::string& path, bool strict) {
  auto reg = gp::GenderTargetRegistry::load(path);
  auto warnings = gp::validate_parity(reg);
  auto more = gp::consistency_warnings(reg);
  warnings.insert(warnings.end(), more.begin(), more.end());
  for (const auto& w : warnings) {
    if (w.group) {
      fmt::print(stderr, "warning: group {}: {}\n", gp::group_number(*w.group), w.message);
    } else {
      fmt::print(stderr, "warning: {}\n", w.message);
    }
  }
  auto s = gp::summarize(reg);
  fmt::print("ok: registry {} with {} targets and {} benchmark prompts\n", reg.version(), s.total_targets(),
             s.total_expected_prompts());
  return strict && !warnings.empty() ? 1 : 0;
}

int registry_summary(const std::string& path) {
  auto reg = gp::GenderTargetRegistry::load(path);
  fmt::print("{}\n", gp::to_json(gp::summarize(reg)).dump(2));
  return 0;
}

// ---- bench ----

struct GenerateOptions {
  std::string registry;
  std::string groups = "1,2,3";
  std::string configs = "1-6";
  int variant = 1;
  std::optional<size_t> sample;
  uint64_t seed = 0;
  std::optional<size_t> limit;
  std::string out = "-";
};

int bench_generate(const GenerateOptions& o) {
  auto reg = gp::GenderTargetRegistry::load(o.registry);
  gp::BenchmarkSelection sel;
  sel.groups = parse_groups(o.groups);
  sel.configs = gp::parse_index_list(o.configs, 1, 6);
  sel.variant = parse_variant(o.variant);
  if (o.sample) sel.sample = gp::SampleSpec{*o.sample, o.seed};
  sel.limit = o.limit;
  gp::BenchmarkStream stream(reg, sel);
  size_t n = gp::write_prompts(out_path(o.out), gp::prompts_header(reg, sel), stream);
  fmt::print(stderr, "wrote {} prompts (population {})\n", n, stream.population());
  return 0;
}

struct RunCmdOptions {
  std::string prompts;
  EndpointOptions endpoint;
  int reps = 5;
  int max_reps = 10;
  int parallelism = 1;
  double rps = 0.0;
  int max_retries = 5;
  double temperature = 0.7;
  double top_p = 0.9;
  std::optional<int> top_k;
  int max_tokens = 256;
  std::optional<double> repetition_penalty;
  std::optional<int64_t> seed;
  bool logprobs = false;
  bool fixed_clock = false;
  std::string out;
};

int bench_run(const RunCmdOptions& o) {
  auto prompts = gp::read_prompts(in_path(o.prompts));
  Endpoint ep = o.endpoint.open();
  gp::GenerationParams params;
  params.model = o.endpoint.model_name(ep.is_mock());
  params.temperature = o.temperature;
  params.top_p = o.top_p;
  params.top_k = o.top_k;
  params.max_tokens = o.max_tokens;
  params.repetition_penalty = o.repetition_penalty;
  params.seed = o.seed;
  params.logprobs = o.logprobs;
  params.validate();
  bool fixed = o.fixed_clock || ep.is_mock();
  auto manifest = gp::make_run_manifest(prompts, ep.chat(), params, o.reps, fixed);
  gp::RunOptions ro;
  ro.repetitions = o.reps;
  ro.max_repetitions = o.max_reps;
  ro.parallelism = o.parallelism;
  ro.requests_per_second = o.rps;
  ro.retry.max_retries = o.max_retries;
  ro.fixed_clock = fixed;
  auto s = gp::run_benchmark(prompts.prompts, ep.chat(), manifest, ro, o.out);
  fmt::print(stderr, "expected {}, skipped {}, written {}, failures {}\n", s.expected, s.skipped, s.written, s.failures);
  if (s.failures > 0) {
    fmt::print(stderr, "{} requests failed upstream and were logged as failure records; resume treats them as done\n",
               s.failures);
    return 2;
  }
  return 0;
}

int bench_parse(const std::string& run_path, const std::string& prompts_path, const std::string& out, bool strict) {
  auto run = gp::read_run_log(in_path(run_path));
  auto prompts = gp::read_prompts(prompts_path);
  gp::ParseOptions po;
  po.fallback = !strict;
  auto result = gp::parse_run(run, prompts, po);
  gp::write_parsed(out_path(out), result, run.manifest, po);
  const auto& st = result.stats;
  fmt::print(stderr, "parsed {}: biased {}, anti-biased {}, ambiguous {}, unparseable {}, failed {}\n", st.total,
             st.count(gp::Verdict::Biased), st.count(gp::Verdict::AntiBiased), st.count(gp::Verdict::Ambiguous),
             st.count(gp::Verdict::Unparseable), st.response_failures);
  return 0;
}

struct ScoreCmdOptions {
  std::string run;
  std::string scorer = "stub";
  std::string registry;
  std::optional<std::string> lexicon;
  size_t batch = gp::kMaxScoreBatch;
  int max_retries = 3;
  std::string out = "-";
};

int bench_score(const ScoreCmdOptions& o) {
  auto run = gp::read_run_log(in_path(o.run));
  std::optional<gp::GenderTargetRegistry> reg;
  if (!o.registry.empty()) reg = gp::GenderTargetRegistry::load(o.registry);
  std::optional<fs::path> lex;
  if (o.lexicon) lex = *o.lexicon;
  auto scorer = gp::make_scorer(o.scorer, reg ? &*reg : nullptr, lex);
  gp::ScoreOptions so;
  so.batch_size = o.batch;
  so.max_retries = o.max_retries;
  auto records = gp::score_run(run, *scorer, so);
  gp::write_scores(out_path(o.out), records, gp::to_json(run.manifest), scorer->scorer_id());
  size_t failed = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.error.has_value(); });
  fmt::print(stderr, "scored {} responses, {} failures\n", records.size() - failed, failed);
  return 0;
}

struct MetricsCmdOptions {
  std::string parsed;
  std::optional<std::string> scores;
  std::optional<std::string> prompts;
  EndpointOptions endpoint;
  bool perplexity_fallback = false;
  bool perplexity_only = false;
  std::string label = "model";
  std::string out = "-";
  bool force = false;
};

int bench_metrics(const MetricsCmdOptions& o) {
  auto parsed = gp::read_parsed(in_path(o.parsed));
  std::optional<gp::ScoreFile> scores;
  if (o.scores) scores = gp::read_scores(*o.scores);
  std::optional<gp::PromptFile> prompts;
  if (o.prompts) prompts = gp::read_prompts(*o.prompts);
  std::optional<Endpoint> ep;
  gp::MetricsInputs in;
  in.label = o.label;
  in.parsed = &parsed;
  in.scores = scores ? &*scores : nullptr;
  in.prompts = prompts ? &*prompts : nullptr;
  in.options.perplexity_fallback = o.perplexity_fallback;
  in.options.perplexity_only = o.perplexity_only;
  in.force = o.force;
  if (o.perplexity_fallback || o.perplexity_only) {
    if (!prompts) throw gp::Error(gp::ErrorCode::InvalidInput, "perplexity decisions need --prompts");
    gp::GenerationParams lp;
    ep = o.endpoint.open(lp);
    lp.model = o.endpoint.model_name(ep->is_mock());
    if (!ep->is_mock()) ep = o.endpoint.open(lp);
    in.logprobs = &ep->logprobs();
  }
  auto report = gp::metrics_report(in);
  for (const auto& w : report.warnings) fmt::print(stderr, "warning: {}\n", w);
  write_output(o.out, gp::to_json(report).dump(2) + "\n");
  return 0;
}

int bench_stereo(const std::string& pairs_path, const EndpointOptions& eo, const std::string& normalization,
                 const std::string& out) {
  auto inputs = gp::read_stereo_pairs(in_path(pairs_path));
  gp::StereoNormalization mode;
  if (normalization == "proportional") {
    mode = gp::StereoNormalization::Proportional;
  } else if (normalization == "inverse-perplexity") {
    mode = gp::StereoNormalization::InversePerplexity;
  } else {
    throw gp::Error(gp::ErrorCode::InvalidInput, fmt::format("unknown normalization {}", normalization));
  }
  bool need_model = std::any_of(inputs.begin(), inputs.end(), [](const auto& p) { return !p.ppl_more || !p.ppl_less; });
  std::optional<Endpoint> ep;
  gp::LogprobModel* model = nullptr;
  if (need_model) {
    gp::GenerationParams lp;
    ep = eo.open(lp);
    lp.model = eo.model_name(ep->is_mock());
    if (!ep->is_mock()) ep = eo.open(lp);
    model = &ep->logprobs();
  }
  auto result = gp::stereo_delta(inputs, model, mode);
  write_output(out, gp::to_json(result).dump(2) + "\n");
  return 0;
}

int bench_compare(const std::string& before, const std::string& after, const std::string& out, bool force) {
  auto r = gp::compare_reports(gp::read_report(before), gp::read_report(after), force);
  write_output(out, gp::to_json(r).dump(2) + "\n");
  return 0;
}

int bench_scorer_stub(int port, const std::string& host, const std::string& registry,
                      const std::optional<std::string>& lexicon) {
  std::optional<gp::GenderTargetRegistry> reg;
  if (!registry.empty()) reg = gp::GenderTargetRegistry::load(registry);
  std::optional<fs::path> lex;
  if (lexicon) lex = *lexicon;
  auto client = gp::make_scorer("stub", reg ? &*reg : nullptr, lex);
  std::shared_ptr<gp::StubScorer> stub(static_cast<gp::StubScorer*>(client.release()));
  gp::StubScorerServer server(stub);
  fmt::print("serving {} on {}:{}\n", gp::kScorerProtocol, host, port);
  std::cout.flush();
  server.serve_forever(port, host);
  return 0;
}

// ---- debias ----

struct DebiasGenerateOptions {
  std::string registry;
  size_t names_top = 50;
  size_t descriptors_top = 50;
  std::string groups = "1,2,3";
  std::optional<std::string> holdout;
  bool strict_holdout = false;
  std::string out = "-";
};

int debias_generate(const DebiasGenerateOptions& o) {
  auto reg = gp::GenderTargetRegistry::load(o.registry);
  gp::DebiasOptions opts;
  opts.names_top = o.names_top;
  opts.descriptors_top = o.descriptors_top;
  opts.groups = parse_groups(o.groups);
  gp::HoldoutGuard guard;
  if (o.holdout) {
    auto held = gp::read_prompts(*o.holdout);
    check_registry(held.header.value("registry_version", ""), reg, false);
    guard = gp::HoldoutGuard(held.prompts, o.strict_holdout);
  }
  auto gen = gp::generate_debias_prompts(reg, opts, guard);
  gp::write_debias_prompts(out_path(o.out), gen.prompts, reg, opts);
  for (gp::GroupId g : opts.groups) {
    fmt::print(stderr, "group {}: {} prompts expected\n", gp::group_number(g), gen.expected[gp::group_index(g)]);
  }
  fmt::print(stderr, "wrote {} prompts, {} refused by the holdout guard\n", gen.prompts.size(), gen.refused);
  return 0;
}

int debias_ingest(const std::string& prompts_path, const std::string& responses, const std::string& out) {
  auto file = gp::read_debias(prompts_path);
  auto rep = gp::ingest_responses(file.prompts, in_path(responses));
  Json extra = {{"registry_version", file.header.value("registry_version", "")}};
  gp::write_debias_records(out_path(out), rep.records, extra);
  fmt::print(stderr, "ingested {} records, {} missing, {} orphans, {} duplicates\n", rep.records.size(),
             rep.missing.size(), rep.orphans.size(), rep.duplicates.size());
  for (const auto& id : rep.orphans) fmt::print(stderr, "{}: {}\n", gp::to_string(gp::ErrorCode::OrphanResponse), id);
  for (const auto& id : rep.duplicates) {
    fmt::print(stderr, "{}: {} (first response kept)\n", gp::to_string(gp::ErrorCode::DuplicateResponse), id);
  }
  return rep.orphans.empty() && rep.duplicates.empty() ? 0 : 1;
}

struct AuditCmdOptions {
  std::string records;
  std::string registry;
  std::string scorer = "stub";
  std::optional<std::string> lexicon;
  double toxicity_max = 0.1;
  double parity_sigma_max = 0.05;
  std::string out = "-";
  bool force = false;
};

std::string parity_line(const gp::ParityReport& p) {
  std::vector<std::string> means;
  for (const auto& m : p.mean_positive) means.push_back(m ? fmt::format("{:.4f}", *m) : "n/a");
  return fmt::format("parity: positive regard means {}, sigma {}, threshold {}, {}", fmt::join(means, "/"),
                     p.sigma ? fmt::format("{:.4f}", *p.sigma) : "n/a", p.threshold,
                     p.passed ? "passed" : "failed: " + p.reason);
}

int debias_audit(const AuditCmdOptions& o) {
  auto file = gp::read_debias(in_path(o.records));
  auto reg = gp::GenderTargetRegistry::load(o.registry);
  check_registry(file.header.value("registry_version", ""), reg, o.force);
  std::optional<fs::path> lex;
  if (o.lexicon) lex = *o.lexicon;
  auto scorer = gp::make_scorer(o.scorer, &reg, lex);
  gp::AuditOptions ao;
  ao.toxicity_max = o.toxicity_max;
  ao.parity_sigma_max = o.parity_sigma_max;
  auto outcome = gp::audit_records(std::move(file.records), reg, *scorer, ao);
  Json extra = {{"registry_version", reg.version()}, {"scorer", scorer->scorer_id()}, {"parity", gp::to_json(outcome.parity)}};
  gp::write_debias_records(out_path(o.out), outcome.records, extra);
  fmt::print(stderr, "audited: {} passed, {} rejected\n", outcome.auto_audited, outcome.rejected);
  fmt::print(stderr, "{}\n", parity_line(outcome.parity));
  return 0;
}

int debias_review(const std::string& records, const std::string& decisions, const std::string& out) {
  auto file = gp::read_debias(in_path(records));
  auto reviewed = gp::apply_review(std::move(file.records), gp::read_review_decisions(decisions));
  Json extra = file.header;
  extra.erase("schema");
  extra.erase("content");
  gp::write_debias_records(out_path(out), reviewed, extra);
  return 0;
}

struct ExportCmdOptions {
  std::string records;
  std::string registry;
  std::string format = "instruction-pairs";
  double parity_sigma_max = 0.05;
  int lora_rank = 8;
  double lora_alpha = 16.0;
  double lora_dropout = 0.05;
  std::vector<std::string> target_modules = {"q_proj", "v_proj"};
  std::string out;
  std::string config_out;
  bool force = false;
};

int debias_export(const ExportCmdOptions& o) {
  auto file = gp::read_debias(in_path(o.records));
  auto reg = gp::GenderTargetRegistry::load(o.registry);
  check_registry(file.header.value("registry_version", ""), reg, o.force);
  auto fmt_ = gp::export_format_from_string(o.format);
  if (!fmt_) throw gp::Error(gp::ErrorCode::InvalidInput, fmt::format("unknown export format {}", o.format));
  gp::ExportOptions eo;
  eo.format = *fmt_;
  eo.parity_sigma_max = o.parity_sigma_max;
  eo.lora.rank = o.lora_rank;
  eo.lora.alpha = o.lora_alpha;
  eo.lora.dropout = o.lora_dropout;
  eo.lora.target_modules = o.target_modules;
  auto res = gp::export_finetune(file.records, reg, eo, o.out, o.config_out);
  fmt::print(stderr, "exported {} examples ({} rejected records skipped)\n", res.examples, res.skipped_rejected);
  fmt::print(stderr, "{}\n", parity_line(res.parity));
  return 0;
}

// ---- report ----

std::vector<gp::BiasReport> load_reports(const std::vector<std::string>& paths, bool force) {
  std::vector<gp::BiasReport> reports;
  for (const auto& p : paths) reports.push_back(gp::read_report(p));
  gp::check_registry_versions(reports, force);
  return reports;
}

int report_emit(const std::vector<std::string>& paths, const std::string& format, const std::string& out, bool force) {
  auto f = gp::report_format_from_string(format);
  if (!f) throw gp::Error(gp::ErrorCode::InvalidInput, fmt::format("unknown report format {}", format));
  auto reports = load_reports(paths, force);
  write_output(out, gp::emit_report(reports, *f));
  return 0;
}

int report_plotdata(const std::vector<std::string>& paths, const std::string& dir, bool force) {
  auto reports = load_reports(paths, force);
  for (const auto& p : gp::write_plotdata(reports, dir)) fmt::print("{}\n", p.string());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gender-bias benchmark toolkit for language models"};
  app.set_config("--config", "", "TOML or INI file with option values, sections named after subcommands");
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(gp::tool_version()));
  int rc = 0;

  auto* registry = app.add_subcommand("registry", "inspect a target registry");
  registry->require_subcommand(1);
  std::string reg_path;
  bool reg_strict = false;
  auto* rv = registry->add_subcommand("validate", "load a registry and report parity warnings");
  rv->add_option("path", reg_path, "registry file")->required();
  rv->add_flag("--strict", reg_strict, "treat warnings as errors");
  rv->callback([&] { rc = registry_validate(reg_path, reg_strict); });
  auto* rs = registry->add_subcommand("summary", "print per-group counts as JSON");
  rs->add_option("path", reg_path, "registry file")->required();
  rs->callback([&] { rc = registry_summary(reg_path); });

  auto* bench = app.add_subcommand("bench", "benchmark pipeline");
  bench->require_subcommand(1);

  GenerateOptions gen;
  auto* bg = bench->add_subcommand("generate", "enumerate assessment prompts");
  bg->add_option("--registry", gen.registry, "registry file")->required();
  bg->add_option("--groups", gen.groups, "groups, e.g. 1,2,3");
  bg->add_option("--configs", gen.configs, "configurations, e.g. 1-6");
  bg->add_option("--prompt-variant", gen.variant, "template variant 1, 2 or 3");
  bg->add_option("--sample", gen.sample, "uniform sample of N prompts");
  bg->add_option("--seed", gen.seed, "sampler seed");
  bg->add_option("--limit", gen.limit, "stop after N prompts");
  bg->add_option("--out", gen.out, "output file, - for stdout");
  bg->callback([&] { rc = bench_generate(gen); });

  RunCmdOptions run;
  auto* br = bench->add_subcommand("run", "send prompts to a model and append to a run log");
  br->add_option("--prompts", run.prompts, "prompt file")->required();
  run.endpoint.add(br);
  br->add_option("--reps", run.reps, "repetitions per prompt");
  br->add_option("--max-reps", run.max_reps, "upper bound on --reps");
  br->add_option("--parallelism", run.parallelism, "concurrent requests");
  br->add_option("--rps", run.rps, "requests per second, 0 for unlimited");
  br->add_option("--max-retries", run.max_retries, "retries on rate limits and unreachable endpoints");
  br->add_option("--temperature", run.temperature);
  br->add_option("--top-p", run.top_p);
  br->add_option("--top-k", run.top_k);
  br->add_option("--max-tokens", run.max_tokens);
  br->add_option("--repetition-penalty", run.repetition_penalty);
  br->add_option("--seed", run.seed);
  br->add_flag("--logprobs", run.logprobs, "request token logprobs");
  br->add_flag("--fixed-clock", run.fixed_clock, "pin timestamps and zero latency (always on for mock endpoints)");
  br->add_option("--out", run.out, "run log; resumed when present")->required();
  br->callback([&] { rc = bench_run(run); });

  std::string parse_run_path;
  std::string parse_prompts;
  std::string parse_out = "-";
  bool parse_strict = false;
  auto* bp = bench->add_subcommand("parse", "extract selections from a run log");
  bp->add_option("--run", parse_run_path, "run log")->required();
  bp->add_option("--prompts", parse_prompts, "prompt file")->required();
  bp->add_option("--out", parse_out, "output file, - for stdout");
  bp->add_flag("--strict", parse_strict, "disable the unmarked fallback match");
  bp->callback([&] { rc = bench_parse(parse_run_path, parse_prompts, parse_out, parse_strict); });

  ScoreCmdOptions score;
  auto* bs = bench->add_subcommand("score", "score responses for toxicity and regard");
  bs->add_option("--run", score.run, "run log")->required();
  bs->add_option("--scorer", score.scorer, "stub or scorer base URL");
  bs->add_option("--registry", score.registry, "registry for the stub lexicon");
  bs->add_option("--lexicon", score.lexicon, "stub lexicon file");
  bs->add_option("--batch", score.batch, "texts per request");
  bs->add_option("--max-retries", score.max_retries, "retries per batch");
  bs->add_option("--out", score.out, "output file, - for stdout");
  bs->callback([&] { rc = bench_score(score); });

  MetricsCmdOptions met;
  auto* bm = bench->add_subcommand("metrics", "aggregate per-group metrics into a report");
  bm->add_option("--parsed", met.parsed, "parsed selections")->required();
  bm->add_option("--scores", met.scores, "scores file");
  bm->add_option("--prompts", met.prompts, "prompt file, needed for perplexity decisions");
  met.endpoint.add(bm);
  bm->add_flag("--perplexity-fallback", met.perplexity_fallback, "decide unparsed selections by perplexity");
  bm->add_flag("--perplexity-only", met.perplexity_only, "decide every selection by perplexity");
  bm->add_option("--label", met.label, "row label");
  bm->add_option("--out", met.out, "report JSON, - for stdout");
  bm->add_flag("--force", met.force, "accept mismatched registry versions");
  bm->callback([&] { rc = bench_metrics(met); });

  std::string stereo_pairs;
  EndpointOptions stereo_ep;
  std::string stereo_norm = "proportional";
  std::string stereo_out = "-";
  auto* bst = bench->add_subcommand("stereo", "perplexity delta over stereotype sentence pairs");
  bst->add_option("--pairs", stereo_pairs, "pairs JSONL")->required();
  stereo_ep.add(bst);
  bst->add_option("--normalization", stereo_norm, "proportional or inverse-perplexity");
  bst->add_option("--out", stereo_out, "output file, - for stdout");
  bst->callback([&] { rc = bench_stereo(stereo_pairs, stereo_ep, stereo_norm, stereo_out); });

  std::string cmp_before;
  std::string cmp_after;
  std::string cmp_out = "-";
  bool cmp_force = false;
  auto* bc = bench->add_subcommand("compare", "attach a before/after reduction section to a report");
  bc->add_option("--before", cmp_before, "report before debiasing")->required();
  bc->add_option("--after", cmp_after, "report after debiasing")->required();
  bc->add_option("--out", cmp_out, "report JSON, - for stdout");
  bc->add_flag("--force", cmp_force, "accept mismatched registry versions");
  bc->callback([&] { rc = bench_compare(cmp_before, cmp_after, cmp_out, cmp_force); });

  int stub_port = 8765;
  std::string stub_host = "127.0.0.1";
  std::string stub_registry;
  std::optional<std::string> stub_lexicon;
  auto* bss = bench->add_subcommand("scorer-stub", "serve the lexicon stub scorer over HTTP");
  bss->add_option("--port", stub_port);
  bss->add_option("--host", stub_host);
  bss->add_option("--registry", stub_registry, "registry for the lexicon");
  bss->add_option("--lexicon", stub_lexicon, "lexicon file");
  bss->callback([&] { rc = bench_scorer_stub(stub_port, stub_host, stub_registry, stub_lexicon); });

  auto* debias = app.add_subcommand("debias", "counterfactual fine-tuning data");
  debias->require_subcommand(1);

  DebiasGenerateOptions dg;
  auto* dgen = debias->add_subcommand("generate", "render counter-narrative prompts");
  dgen->add_option("--registry", dg.registry, "registry file")->required();
  dgen->add_option("--names-top", dg.names_top, "top-ranked names per group");
  dgen->add_option("--descriptors-top", dg.descriptors_top, "anti-biased descriptors per group");
  dgen->add_option("--groups", dg.groups, "groups, e.g. 1,2,3");
  dgen->add_option("--holdout", dg.holdout, "held-out benchmark prompts");
  dgen->add_flag("--strict-holdout", dg.strict_holdout, "also refuse pairs co-occurring in held-out prompts");
  dgen->add_option("--out", dg.out, "output file, - for stdout");
  dgen->callback([&] { rc = debias_generate(dg); });

  std::string ing_prompts;
  std::string ing_responses;
  std::string ing_out = "-";
  auto* ding = debias->add_subcommand("ingest", "join externally written responses to prompts");
  ding->add_option("--prompts", ing_prompts, "debias prompt file")->required();
  ding->add_option("--responses", ing_responses, "JSONL of {record_id, response}")->required();
  ding->add_option("--out", ing_out, "output file, - for stdout");
  ding->callback([&] { rc = debias_ingest(ing_prompts, ing_responses, ing_out); });

  AuditCmdOptions au;
  auto* daud = debias->add_subcommand("audit", "scan and score records");
  daud->add_option("--records", au.records, "debias records")->required();
  daud->add_option("--registry", au.registry, "registry file")->required();
  daud->add_option("--scorer", au.scorer, "stub or scorer base URL");
  daud->add_option("--lexicon", au.lexicon, "stub lexicon file");
  daud->add_option("--toxicity-max", au.toxicity_max);
  daud->add_option("--parity-sigma-max", au.parity_sigma_max);
  daud->add_option("--out", au.out, "output file, - for stdout");
  daud->add_flag("--force", au.force, "accept mismatched registry versions");
  daud->callback([&] { rc = debias_audit(au); });

  std::string rev_records;
  std::string rev_decisions;
  std::string rev_out = "-";
  auto* drev = debias->add_subcommand("review", "apply human review decisions");
  drev->add_option("--records", rev_records, "debias records")->required();
  drev->add_option("--decisions", rev_decisions, "JSONL of {record_id, decision, note}")->required();
  drev->add_option("--out", rev_out, "output file, - for stdout");
  drev->callback([&] { rc = debias_review(rev_records, rev_decisions, rev_out); });

  ExportCmdOptions ex;
  auto* dexp = debias->add_subcommand("export", "write a fine-tuning dataset and adapter config");
  dexp->add_option("--records", ex.records, "audited debias records")->required();
  dexp->add_option("--registry", ex.registry, "registry file")->required();
  dexp->add_option("--format", ex.format, "instruction-pairs or chat-turns");
  dexp->add_option("--parity-sigma-max", ex.parity_sigma_max);
  dexp->add_option("--lora-rank", ex.lora_rank);
  dexp->add_option("--lora-alpha", ex.lora_alpha);
  dexp->add_option("--lora-dropout", ex.lora_dropout);
  dexp->add_option("--target-modules", ex.target_modules);
  dexp->add_option("--out", ex.out, "dataset JSONL")->required();
  dexp->add_option("--config-out", ex.config_out, "fine-tune config JSON")->required();
  dexp->add_flag("--force", ex.force, "accept mismatched registry versions");
  dexp->callback([&] { rc = debias_export(ex); });

  auto* report = app.add_subcommand("report", "render reports");
  report->require_subcommand(1);
  std::vector<std::string> rep_paths;
  std::string rep_format = "markdown";
  std::string rep_out = "-";
  bool rep_force = false;
  auto* re = report->add_subcommand("emit", "render one or more reports");
  re->add_option("reports", rep_paths, "report JSON files")->required();
  re->add_option("--format", rep_format, "markdown, csv or jsonl");
  re->add_option("--out", rep_out, "output file, - for stdout");
  re->add_flag("--force", rep_force, "accept mismatched registry versions");
  re->callback([&] { rc = report_emit(rep_paths, rep_format, rep_out, rep_force); });
  std::string plot_dir = "plotdata";
  auto* rp = report->add_subcommand("plotdata", "write per-metric series for plotting");
  rp->add_option("reports", rep_paths, "report JSON files")->required();
  rp->add_option("--out-dir", plot_dir, "output directory");
  rp->add_flag("--force", rep_force, "accept mismatched registry versions");
  rp->callback([&] { rc = report_plotdata(rep_paths, plot_dir, rep_force); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const gp::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return gp::exit_code_for(e.code());
  } catch (const std::exception& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return rc;
}
