#include "genderpair/runner.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <set>
#include <thread>

#include <fmt/format.h>

#include "genderpair/hash.hpp"

#ifndef GENDERPAIR_VERSION
#define GENDERPAIR_VERSION "0.0.0"
#endif

namespace genderpair {

std::string_view tool_version() { return GENDERPAIR_VERSION; }

std::string prompts_digest(std::span<const AssessmentPrompt> prompts) {
  std::string buf;
  for (const auto& p : prompts) {
    buf += to_json(p).dump();
    buf += '\n';
  }
  return sha256_hex(buf);
}

bool RunManifest::compatible_with(const RunManifest& o) const {
  return registry_version == o.registry_version && prompts_sha256 == o.prompts_sha256 && endpoint == o.endpoint &&
         params == o.params && repetitions == o.repetitions && tool_version == o.tool_version;
}

Json to_json(const RunManifest& m) {
  return {{"registry_version", m.registry_version},
          {"prompts_sha256", m.prompts_sha256},
          {"endpoint", m.endpoint},
          {"params", to_json(m.params)},
          {"repetitions", m.repetitions},
          {"tool_version", m.tool_version},
          {"created", m.created}};
}

RunManifest run_manifest_from_json(const Json& j) {
  RunManifest m;
  try {
    m.registry_version = j.at("registry_version").get<std::string>();
    m.prompts_sha256 = j.value("prompts_sha256", "");
    m.endpoint = j.value("endpoint", "");
    if (j.contains("params")) m.params = params_from_json(j["params"]);
    m.repetitions = j.value("repetitions", 0);
    m.tool_version = j.value("tool_version", "");
    m.created = j.value("created", "");
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("run manifest: {}", e.what()));
  }
  return m;
}

void sort_records(std::vector<ResponseRecord>& records) {
  std::sort(records.begin(), records.end(), [](const ResponseRecord& a, const ResponseRecord& b) {
    if (a.prompt_id != b.prompt_id) return a.prompt_id < b.prompt_id;
    return a.repetition_index < b.repetition_index;
  });
}

namespace {

Json run_header(const RunManifest& m) {
  Json h = make_header(kRunSchema);
  h["manifest"] = to_json(m);
  return h;
}

// Drops a torn final line left by an interrupted writer.
void truncate_partial_tail(const std::filesystem::path& path) {
  std::string contents = read_text_file(path);
  if (contents.empty() || contents.back() == '\n') return;
  size_t keep = contents.rfind('\n');
  keep = keep == std::string::npos ? 0 : keep + 1;
  std::error_code ec;
  std::filesystem::resize_file(path, keep, ec);
  if (ec) throw Error(ErrorCode::IoError, fmt::format("{}: cannot truncate: {}", path.string(), ec.message()));
}

}  // namespace

RunLog read_run_log(const std::filesystem::path& path) {
  RunLog log;
  JsonlReader reader(path, kRunSchema);
  if (!reader.header().contains("manifest")) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("{}: header has no manifest", path.string()));
  }
  log.manifest = run_manifest_from_json(reader.header()["manifest"]);
  Json rec;
  std::set<std::pair<std::string, int>> seen;
  while (reader.next(rec)) {
    ResponseRecord r;
    try {
      r = response_from_json(rec);
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}:{}: {}", path.string(), reader.line_number(), e.detail()));
    }
    if (!seen.emplace(r.prompt_id, r.repetition_index).second) {
      throw Error(ErrorCode::SchemaViolation, fmt::format("{}:{}: duplicate ({}, {})", path.string(),
                                                          reader.line_number(), r.prompt_id, r.repetition_index));
    }
    log.records.push_back(std::move(r));
  }
  sort_records(log.records);
  return log;
}

RunSummary run_benchmark(std::span<const AssessmentPrompt> prompts, ChatModel& model, const RunManifest& manifest,
                         const RunOptions& options, const std::filesystem::path& log_path) {
  if (options.repetitions < 1 || options.repetitions > options.max_repetitions) {
    throw Error(ErrorCode::InvalidInput,
                fmt::format("repetitions {} not in [1, {}]", options.repetitions, options.max_repetitions));
  }
  if (options.parallelism < 1) throw Error(ErrorCode::InvalidInput, "parallelism must be >= 1");
  if (manifest.repetitions != options.repetitions) {
    throw Error(ErrorCode::InvalidInput, "manifest repetitions disagree with run options");
  }
  manifest.params.validate();

  RunSummary summary;
  summary.expected = prompts.size() * static_cast<size_t>(options.repetitions);

  std::set<std::pair<std::string, int>> present;
  bool exists = std::filesystem::exists(log_path);
  if (exists) {
    truncate_partial_tail(log_path);
    RunLog prior = read_run_log(log_path);
    if (!prior.manifest.compatible_with(manifest)) {
      throw Error(ErrorCode::SchemaViolation,
                  fmt::format("{}: existing run log was produced with a different manifest", log_path.string()));
    }
    for (const auto& r : prior.records) present.emplace(r.prompt_id, r.repetition_index);
  }

  std::ofstream out;
  if (exists) {
    out.open(log_path, std::ios::binary | std::ios::app);
  } else {
    out.open(log_path, std::ios::binary | std::ios::trunc);
    if (out) out << run_header(manifest).dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, fmt::format("{}: cannot open run log for writing", log_path.string()));
  out.flush();

  struct Item {
    size_t prompt;
    int rep;
  };
  std::vector<Item> work;
  for (size_t i = 0; i < prompts.size(); ++i) {
    for (int r = 0; r < options.repetitions; ++r) {
      if (present.count({prompts[i].prompt_id, r})) {
        ++summary.skipped;
        continue;
      }
      work.push_back({i, r});
    }
  }

  RateLimiter limiter(options.requests_per_second, std::max(1.0, options.requests_per_second));
  CompleteOptions copts;
  copts.retry = options.retry;
  copts.limiter = &limiter;
  if (options.fixed_clock) {
    copts.timestamp = [] { return std::string(kFixedTimestamp); };
    copts.measure_latency = false;
  }

  std::atomic<size_t> next{0};
  std::mutex write_mu;
  std::exception_ptr fatal;
  std::atomic<bool> abort{false};

  auto worker = [&] {
    while (!abort.load()) {
      size_t k = next.fetch_add(1);
      if (k >= work.size()) return;
      const auto& item = work[k];
      ResponseRecord rec;
      try {
        rec = complete(model, prompts[item.prompt], manifest.params, item.rep, copts);
      } catch (...) {
        std::lock_guard lock(write_mu);
        if (!fatal) fatal = std::current_exception();
        abort = true;
        return;
      }
      std::lock_guard lock(write_mu);
      out << to_json(rec).dump() << '\n';
      out.flush();
      if (!out) {
        if (!fatal) {
          fatal = std::make_exception_ptr(
              Error(ErrorCode::IoError, fmt::format("{}: write failed", log_path.string())));
        }
        abort = true;
        return;
      }
      ++summary.written;
      if (rec.failed()) ++summary.failures;
      if (options.progress) options.progress(summary.skipped + summary.written, summary.expected);
    }
  };

  size_t n_threads = std::min<size_t>(static_cast<size_t>(options.parallelism), std::max<size_t>(work.size(), 1));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(n_threads);
    for (size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  }
  if (fatal) std::rethrow_exception(fatal);
  return summary;
}

}  // namespace genderpair
