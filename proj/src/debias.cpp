#include "genderpair/debias.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include <fmt/format.h>
#include <fmt/ranges.h>

#include "genderpair/hash.hpp"
#include "genderpair/metrics.hpp"
#include "genderpair/text.hpp"

namespace genderpair {
namespace {

std::string make_record_id(std::string_view version, const GenderTarget& t, std::string_view anti) {
  std::string key = fmt::format("{}\x1f{}\x1f{}\x1f{}\x1f{}", version, group_number(t.group), to_string(t.kind),
                                t.surface, anti);
  return fmt::format("d{}-{}", group_number(t.group), sha256_hex(key).substr(0, 16));
}

using Pair = std::pair<std::string, std::string>;
Pair norm_pair(std::string_view target, std::string_view anti) {
  return {text::normalize_phrase(target), text::normalize_phrase(anti)};
}

bool exportable(ReviewStatus s) { return s == ReviewStatus::AutoAudited || s == ReviewStatus::HumanApproved; }

}  // namespace

std::string render_debias_text(std::string_view target, std::string_view anti) {
  return fmt::format(
      "Please generate a cohesive text by incorporating the two words from a pair set {{{}, {}}}. You should mark "
      "the selected element with '{{ }}' in the generated text.",
      target, anti);
}

std::vector<GenderTarget> expanded_targets(const GenderTargetRegistry& registry, GroupId g, size_t names_top) {
  std::vector<GenderTarget> out;
  for (const auto& t : registry.benchmark_targets(g)) {
    if (t.kind != TargetKind::Name) out.push_back(t);
  }
  auto names = registry.ranked_names(g);
  if (names.size() < names_top) {
    throw Error(ErrorCode::RankShortfall, fmt::format("group {} has {} ranked names, {} requested", group_number(g),
                                                      names.size(), names_top));
  }
  out.insert(out.end(), names.begin(), names.begin() + static_cast<std::ptrdiff_t>(names_top));
  return out;
}

std::vector<std::string> ranked_anti_descriptors(const GenderTargetRegistry& registry, GroupId g, size_t top) {
  std::vector<DescriptorTriplet> ts(registry.triplets(g).begin(), registry.triplets(g).end());
  std::stable_sort(ts.begin(), ts.end(), [](const auto& a, const auto& b) {
    if (a.rank != b.rank) return a.rank < b.rank;
    return a.source < b.source;
  });
  std::set<std::string> biased;
  for (const auto& t : ts) biased.insert(text::normalize_phrase(t.biased));
  std::set<std::string> seen;
  std::vector<std::string> out;
  for (const auto& t : ts) {
    std::string n = text::normalize_phrase(t.anti_biased);
    if (biased.count(n) || !seen.insert(n).second) continue;
    out.push_back(t.anti_biased);
  }
  if (out.size() < top) {
    throw Error(ErrorCode::RankShortfall, fmt::format("group {} has {} usable anti-biased descriptors, {} requested",
                                                      group_number(g), out.size(), top));
  }
  out.resize(top);
  return out;
}

HoldoutGuard::HoldoutGuard(std::span<const AssessmentPrompt> holdout, bool strict) : strict_(strict) {
  for (const auto& p : holdout) {
    texts_.insert(p.text);
    Pair pair = norm_pair(p.target.surface, p.triplet.anti_biased);
    // Phrase-pair configurations print "(target, descriptor)" verbatim in the prompt.
    if (p.config.shape != PairShape::AttributeSet) verbatim_pairs_.insert(pair);
    cooccurring_pairs_.insert(pair);
  }
}

std::optional<std::string> HoldoutGuard::refuses(const DebiasPrompt& p) const {
  if (texts_.count(p.text)) return fmt::format("{}: prompt text identical to a held-out prompt", p.record_id);
  Pair pair = norm_pair(p.target.surface, p.anti_descriptor);
  if (verbatim_pairs_.count(pair)) {
    return fmt::format("{}: pair ({}, {}) appears verbatim in the held-out set", p.record_id, p.target.surface,
                       p.anti_descriptor);
  }
  if (strict_ && cooccurring_pairs_.count(pair)) {
    return fmt::format("{}: pair ({}, {}) co-occurs in the held-out set", p.record_id, p.target.surface,
                       p.anti_descriptor);
  }
  return std::nullopt;
}

DebiasGeneration generate_debias_prompts(const GenderTargetRegistry& registry, const DebiasOptions& options,
                                         const HoldoutGuard& guard) {
  DebiasGeneration out;
  for (GroupId g : options.groups) {
    if (!registry.has_group(g)) {
      throw Error(ErrorCode::MissingGroup, fmt::format("group {} is not in the registry", group_number(g)));
    }
    auto targets = expanded_targets(registry, g, options.names_top);
    auto descriptors = ranked_anti_descriptors(registry, g, options.descriptors_top);
    out.expected[group_index(g)] = targets.size() * descriptors.size();
    for (const auto& t : targets) {
      for (const auto& d : descriptors) {
        DebiasPrompt p;
        p.group = g;
        p.target = t;
        p.anti_descriptor = d;
        p.text = render_debias_text(t.surface, d);
        p.record_id = make_record_id(registry.version(), t, d);
        if (auto why = guard.refuses(p)) {
          ++out.refused;
          out.refusal_reasons.push_back(*why);
          continue;
        }
        out.prompts.push_back(std::move(p));
      }
    }
  }
  return out;
}

std::string_view to_string(ReviewStatus s) {
  switch (s) {
    case ReviewStatus::Draft: return "Draft";
    case ReviewStatus::AutoAudited: return "AutoAudited";
    case ReviewStatus::HumanApproved: return "HumanApproved";
    case ReviewStatus::Rejected: return "Rejected";
  }
  return "Draft";
}

std::optional<ReviewStatus> review_status_from_string(std::string_view s) {
  for (auto v : {ReviewStatus::Draft, ReviewStatus::AutoAudited, ReviewStatus::HumanApproved, ReviewStatus::Rejected}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

Json to_json(const DebiasPrompt& p) {
  return {{"record_id", p.record_id},
          {"group", group_number(p.group)},
          {"target", to_json(p.target)},
          {"anti_descriptor", p.anti_descriptor},
          {"text", p.text}};
}

DebiasPrompt debias_prompt_from_json(const Json& j) {
  DebiasPrompt p;
  try {
    p.record_id = j.at("record_id").get<std::string>();
    auto g = group_from_number(j.at("group").get<int>());
    if (!g) throw Error(ErrorCode::SchemaViolation, "debias prompt: bad group");
    p.group = *g;
    p.target = target_from_json(j.at("target"), "debias target");
    p.anti_descriptor = j.at("anti_descriptor").get<std::string>();
    p.text = j.at("text").get<std::string>();
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("debias prompt: {}", e.what()));
  }
  return p;
}

Json to_json(const DebiasRecord& r) {
  Json j = to_json(r.prompt);
  j["response"] = r.response;
  j["review_status"] = to_string(r.status);
  j["human_decision"] = r.human_decision;
  if (r.audit) {
    j["audit"] = {{"toxicity", r.audit->toxicity},
                  {"regard", to_json(r.audit->regard)},
                  {"biased_descriptor_hits", r.audit->biased_descriptor_hits},
                  {"reasons", r.audit->reasons}};
  } else {
    j["audit"] = nullptr;
  }
  if (!r.review_note.empty()) j["review_note"] = r.review_note;
  return j;
}

DebiasRecord debias_record_from_json(const Json& j) {
  DebiasRecord r;
  r.prompt = debias_prompt_from_json(j);
  try {
    r.response = j.at("response").get<std::string>();
    auto s = review_status_from_string(j.at("review_status").get<std::string>());
    if (!s) throw Error(ErrorCode::SchemaViolation, "debias record: bad review_status");
    r.status = *s;
    r.human_decision = j.value("human_decision", false);
    if (j.contains("audit") && !j["audit"].is_null()) {
      const Json& a = j["audit"];
      AuditResult ar;
      ar.toxicity = a.at("toxicity").get<double>();
      ar.regard = regard_from_json(a.at("regard"));
      ar.biased_descriptor_hits = a.at("biased_descriptor_hits").get<size_t>();
      ar.reasons = a.value("reasons", std::vector<std::string>{});
      r.audit = ar;
    }
    r.review_note = j.value("review_note", "");
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("debias record: {}", e.what()));
  }
  return r;
}

void write_debias_prompts(const std::filesystem::path& path, const std::vector<DebiasPrompt>& prompts,
                          const GenderTargetRegistry& registry, const DebiasOptions& options) {
  Json h = make_header(kDebiasSchema);
  h["content"] = "prompts";
  h["registry_version"] = registry.version();
  h["names_top"] = options.names_top;
  h["descriptors_top"] = options.descriptors_top;
  JsonlWriter w(path, h);
  for (const auto& p : prompts) w.write(to_json(p));
  w.flush();
}

void write_debias_records(const std::filesystem::path& path, const std::vector<DebiasRecord>& records,
                          const Json& extra_header) {
  Json h = make_header(kDebiasSchema);
  h["content"] = "records";
  for (const auto& [k, v] : extra_header.items()) h[k] = v;
  JsonlWriter w(path, h);
  for (const auto& r : records) w.write(to_json(r));
  w.flush();
}

DebiasFile read_debias(const std::filesystem::path& path) {
  DebiasFile f;
  JsonlReader reader(path, kDebiasSchema);
  f.header = reader.header();
  std::string content = f.header.value("content", "");
  if (content != "prompts" && content != "records") {
    throw Error(ErrorCode::SchemaViolation, fmt::format("{}: header content must be prompts or records", path.string()));
  }
  Json rec;
  while (reader.next(rec)) {
    try {
      if (content == "prompts") {
        f.prompts.push_back(debias_prompt_from_json(rec));
      } else {
        f.records.push_back(debias_record_from_json(rec));
      }
    } catch (const Error& e) {
      throw Error(e.code(), fmt::format("{}:{}: {}", path.string(), reader.line_number(), e.detail()));
    }
  }
  if (content == "records") {
    for (const auto& r : f.records) f.prompts.push_back(r.prompt);
  }
  return f;
}

IngestReport ingest_responses(const std::vector<DebiasPrompt>& prompts,
                              const std::vector<std::pair<std::string, std::string>>& responses) {
  IngestReport rep;
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < prompts.size(); ++i) index.emplace(prompts[i].record_id, i);
  std::map<std::string, std::string> got;
  for (const auto& [id, text] : responses) {
    if (!index.count(id)) {
      rep.orphans.push_back(id);
      continue;
    }
    if (!got.emplace(id, text).second) rep.duplicates.push_back(id);
  }
  for (const auto& p : prompts) {
    auto it = got.find(p.record_id);
    if (it == got.end()) {
      rep.missing.push_back(p.record_id);
      continue;
    }
    DebiasRecord r;
    r.prompt = p;
    r.response = it->second;
    rep.records.push_back(std::move(r));
  }
  return rep;
}

IngestReport ingest_responses(const std::vector<DebiasPrompt>& prompts, const std::filesystem::path& responses) {
  std::ifstream in(responses);
  if (!in) throw Error(ErrorCode::MissingFile, fmt::format("{}: cannot open", responses.string()));
  std::vector<std::pair<std::string, std::string>> rows;
  std::string line;
  size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim_whitespace(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorCode::SchemaViolation, fmt::format("{}:{}: not a JSON object", responses.string(), n));
    }
    if (j.contains("schema")) continue;
    if (!j.contains("record_id") || !j.contains("response") || !j["record_id"].is_string() ||
        !j["response"].is_string()) {
      throw Error(ErrorCode::SchemaViolation,
                  fmt::format("{}:{}: needs string record_id and response", responses.string(), n));
    }
    rows.emplace_back(j["record_id"].get<std::string>(), j["response"].get<std::string>());
  }
  return ingest_responses(prompts, rows);
}

size_t biased_descriptor_hits(const GenderTargetRegistry& registry, GroupId g, std::string_view t) {
  std::set<std::string> words;
  for (const auto& tr : registry.triplets(g)) words.insert(text::normalize_phrase(tr.biased));
  std::string folded = text::casefold(t);
  size_t hits = 0;
  for (const auto& w : words) hits += text::count_whole_word(folded, w);
  return hits;
}

ParityReport compute_parity(const std::vector<DebiasRecord>& records, double threshold) {
  ParityReport p;
  p.threshold = threshold;
  std::array<double, 3> sum{};
  for (const auto& r : records) {
    if (!exportable(r.status) || !r.audit) continue;
    size_t gi = group_index(r.prompt.group);
    sum[gi] += r.audit->regard.positive;
    ++p.passing[gi];
  }
  std::vector<double> means;
  std::vector<int> missing;
  for (GroupId g : kAllGroups) {
    size_t gi = group_index(g);
    if (p.passing[gi] == 0) {
      missing.push_back(group_number(g));
      continue;
    }
    p.mean_positive[gi] = sum[gi] / static_cast<double>(p.passing[gi]);
    means.push_back(*p.mean_positive[gi]);
  }
  if (!missing.empty()) {
    p.reason = fmt::format("no passing records for group(s) {}", fmt::join(missing, ", "));
    return p;
  }
  p.sigma = cross_group_sigma(means);
  p.passed = *p.sigma <= threshold;
  if (!p.passed) p.reason = fmt::format("parity sigma {:.4f} exceeds {:.4f}", *p.sigma, threshold);
  return p;
}

Json to_json(const ParityReport& p) {
  Json means = Json::array();
  for (const auto& m : p.mean_positive) means.push_back(m ? Json(*m) : Json(nullptr));
  return {{"mean_positive", means},
          {"passing", p.passing},
          {"sigma", p.sigma ? Json(*p.sigma) : Json(nullptr)},
          {"threshold", p.threshold},
          {"passed", p.passed},
          {"reason", p.reason}};
}

AuditOutcome audit_records(std::vector<DebiasRecord> records, const GenderTargetRegistry& registry,
                           ScorerClient& scorer, const AuditOptions& options) {
  std::vector<std::string> texts;
  std::vector<size_t> which;
  for (size_t i = 0; i < records.size(); ++i) {
    if (text::trim_whitespace(records[i].response).empty()) continue;
    texts.push_back(records[i].response);
    which.push_back(i);
  }
  std::vector<ScoreOutcome> scored;
  if (!texts.empty()) scored = score_texts(texts, scorer);
  std::map<size_t, const ScoreOutcome*> by_record;
  for (size_t k = 0; k < which.size(); ++k) by_record[which[k]] = &scored[k];

  AuditOutcome out;
  for (size_t i = 0; i < records.size(); ++i) {
    auto& r = records[i];
    AuditResult a;
    auto it = by_record.find(i);
    if (it == by_record.end()) {
      a.reasons.push_back("empty_response");
    } else {
      const ScoreOutcome& o = *it->second;
      if (!o.score) {
        if (o.error == ErrorCode::InvalidInput) {
          a.reasons.push_back("unscorable_response");
        } else {
          throw Error(ErrorCode::ScorerUnavailable, fmt::format("{}: {}", r.prompt.record_id, o.message));
        }
      } else {
        a.toxicity = o.score->toxicity;
        a.regard = o.score->regard;
      }
      a.biased_descriptor_hits = biased_descriptor_hits(registry, r.prompt.group, r.response);
      if (a.biased_descriptor_hits > 0) a.reasons.push_back("biased_descriptor_hit");
      if (o.score && a.toxicity > options.toxicity_max) a.reasons.push_back("toxicity_above_max");
    }
    r.audit = a;
    if (!r.human_decision) r.status = a.reasons.empty() ? ReviewStatus::AutoAudited : ReviewStatus::Rejected;
    if (r.status == ReviewStatus::Rejected) {
      ++out.rejected;
    } else if (r.status == ReviewStatus::AutoAudited) {
      ++out.auto_audited;
    }
  }
  out.parity = compute_parity(records, options.parity_sigma_max);
  out.records = std::move(records);
  return out;
}

std::vector<ReviewDecision> read_review_decisions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingFile, fmt::format("{}: cannot open", path.string()));
  std::vector<ReviewDecision> out;
  std::string line;
  size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (text::trim_whitespace(line).empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      throw Error(ErrorCode::SchemaViolation, fmt::format("{}:{}: not a JSON object", path.string(), n));
    }
    if (j.contains("schema")) continue;
    std::string d = j.value("decision", "");
    if (!j.contains("record_id") || (d != "approve" && d != "reject")) {
      throw Error(ErrorCode::SchemaViolation,
                  fmt::format("{}:{}: needs record_id and decision approve|reject", path.string(), n));
    }
    out.push_back({j["record_id"].get<std::string>(), d == "approve", j.value("note", "")});
  }
  return out;
}

std::vector<DebiasRecord> apply_review(std::vector<DebiasRecord> records, const std::vector<ReviewDecision>& decisions) {
  std::map<std::string, size_t> index;
  for (size_t i = 0; i < records.size(); ++i) index.emplace(records[i].prompt.record_id, i);
  for (const auto& d : decisions) {
    auto it = index.find(d.record_id);
    if (it == index.end()) throw Error(ErrorCode::InvalidInput, fmt::format("review of unknown record {}", d.record_id));
    auto& r = records[it->second];
    if (d.approve && r.audit && r.audit->biased_descriptor_hits > 0) {
      throw Error(ErrorCode::InvalidInput,
                  fmt::format("{} has {} biased-descriptor hits and cannot be approved", d.record_id,
                              r.audit->biased_descriptor_hits));
    }
    r.status = d.approve ? ReviewStatus::HumanApproved : ReviewStatus::Rejected;
    r.human_decision = true;
    r.review_note = d.note;
  }
  return records;
}

std::optional<ExportFormat> export_format_from_string(std::string_view s) {
  if (s == "instruction-pairs") return ExportFormat::InstructionPairs;
  if (s == "chat-turns") return ExportFormat::ChatTurns;
  return std::nullopt;
}

std::string_view to_string(ExportFormat f) {
  return f == ExportFormat::InstructionPairs ? "instruction-pairs" : "chat-turns";
}

ExportResult export_finetune(const std::vector<DebiasRecord>& records, const GenderTargetRegistry& registry,
                             const ExportOptions& options, const std::filesystem::path& dataset_path,
                             const std::filesystem::path& config_path) {
  ExportResult res;
  std::vector<const DebiasRecord*> keep;
  for (const auto& r : records) {
    if (r.status == ReviewStatus::Draft) {
      throw Error(ErrorCode::UnauditedRecord, fmt::format("{} is still Draft", r.prompt.record_id));
    }
    if (r.status == ReviewStatus::Rejected) {
      ++res.skipped_rejected;
      continue;
    }
    if (!r.audit) throw Error(ErrorCode::UnauditedRecord, fmt::format("{} has no audit", r.prompt.record_id));
    // Independent re-scan: stored audit results are not trusted for the leak check.
    size_t hits = biased_descriptor_hits(registry, r.prompt.group, r.response) +
                  biased_descriptor_hits(registry, r.prompt.group, r.prompt.text);
    if (hits > 0 || r.audit->biased_descriptor_hits > 0) {
      throw Error(ErrorCode::UnauditedRecord,
                  fmt::format("{} contains biased descriptors of its group", r.prompt.record_id));
    }
    keep.push_back(&r);
  }
  if (keep.empty()) throw Error(ErrorCode::EmptyExport, "no approved records to export");
  res.parity = compute_parity(records, options.parity_sigma_max);
  if (!res.parity.passed) throw Error(ErrorCode::ParityUnverified, res.parity.reason);

  std::string data;
  for (const auto* r : keep) {
    Json j;
    if (options.format == ExportFormat::InstructionPairs) {
      j = {{"record_id", r->prompt.record_id},
           {"group", group_number(r->prompt.group)},
           {"instruction", r->prompt.text},
           {"output", r->response}};
    } else {
      j = {{"record_id", r->prompt.record_id},
           {"group", group_number(r->prompt.group)},
           {"messages", Json::array({{{"role", "user"}, {"content", r->prompt.text}},
                                     {{"role", "assistant"}, {"content", r->response}}})}};
    }
    data += j.dump();
    data += '\n';
  }
  write_text_file(dataset_path, data);
  res.examples = keep.size();
  res.config = {{"schema", kFinetuneConfigSchema},
                {"adapter", "lora"},
                {"rank", options.lora.rank},
                {"alpha", options.lora.alpha},
                {"dropout", options.lora.dropout},
                {"target_modules", options.lora.target_modules},
                {"dataset", dataset_path.filename().string()},
                {"dataset_sha256", sha256_hex(data)},
                {"format", to_string(options.format)},
                {"examples", res.examples},
                {"registry_version", registry.version()},
                {"parity", to_json(res.parity)}};
  write_text_file(config_path, res.config.dump(2) + "\n");
  return res;
}

}  // namespace genderpair
