#include "genderpair/report.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <fmt/format.h>

#include "genderpair/text.hpp"

namespace genderpair {
namespace {

Json groups_json(const std::array<std::optional<GroupMetrics>, 3>& groups) {
  Json a = Json::array();
  for (const auto& g : groups) a.push_back(g ? to_json(*g) : Json(nullptr));
  return a;
}

std::array<std::optional<GroupMetrics>, 3> groups_from_json(const Json& j) {
  std::array<std::optional<GroupMetrics>, 3> out;
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::SchemaViolation, "report: groups must have 3 entries");
  for (size_t i = 0; i < 3; ++i) {
    if (j[i].is_null()) continue;
    GroupMetrics m = group_metrics_from_json(j[i]);
    if (group_index(m.group) != i) throw Error(ErrorCode::SchemaViolation, "report: group entry out of place");
    out[i] = m;
  }
  return out;
}

Json cross_json(const CrossGroupStats& c) {
  return {{"sigma_positive", c.sigma_positive ? Json(*c.sigma_positive) : Json(nullptr)},
          {"sigma_negative", c.sigma_negative ? Json(*c.sigma_negative) : Json(nullptr)}};
}

CrossGroupStats cross_from_json(const Json& j) {
  CrossGroupStats c;
  if (j.contains("sigma_positive") && !j["sigma_positive"].is_null()) c.sigma_positive = j["sigma_positive"].get<double>();
  if (j.contains("sigma_negative") && !j["sigma_negative"].is_null()) c.sigma_negative = j["sigma_negative"].get<double>();
  return c;
}

bool has_metrics(const BiasReport& r) {
  return std::any_of(r.groups.begin(), r.groups.end(), [](const auto& g) { return g.has_value(); });
}

// A column of the bias table.
struct Column {
  std::string title;
  std::optional<GroupId> group;  // nullopt = sigma column
  MetricId metric;
  bool higher_is_better;
};

std::vector<Column> table_columns() {
  std::vector<Column> cols;
  auto add_groups = [&](std::string_view name, MetricId m, bool higher) {
    for (GroupId g : kAllGroups) cols.push_back({fmt::format("{} G{}", name, group_number(g)), g, m, higher});
  };
  add_groups("BPR", MetricId::Bpr, false);
  add_groups("Tox", MetricId::Toxicity, false);
  add_groups("Pos", MetricId::RegardPositive, true);
  cols.push_back({"Pos σ", std::nullopt, MetricId::RegardPositive, false});
  add_groups("Neg", MetricId::RegardNegative, false);
  cols.push_back({"Neg σ", std::nullopt, MetricId::RegardNegative, false});
  return cols;
}

std::optional<double> column_value(const std::array<std::optional<GroupMetrics>, 3>& groups,
                                   const CrossGroupStats& cross, const Column& c) {
  if (!c.group) return c.metric == MetricId::RegardPositive ? cross.sigma_positive : cross.sigma_negative;
  const auto& g = groups[group_index(*c.group)];
  return g ? metric_value(*g, c.metric) : std::nullopt;
}

std::string csv_escape(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string full(double v) { return fmt::format("{}", v); }

std::string header_row(const std::vector<Column>& cols) {
  std::string h = "| Model |";
  std::string sep = "|---|";
  for (const auto& c : cols) {
    h += " " + c.title + " |";
    sep += "---|";
  }
  return h + "\n" + sep + "\n";
}

}  // namespace

Json to_json(const BiasReport& r) {
  Json j = {{"schema", kReportSchema},
            {"label", r.label},
            {"registry_version", r.registry_version},
            {"groups", groups_json(r.groups)},
            {"cross_group", cross_json(r.cross)},
            {"parse_stats", r.parse_stats ? to_json(*r.parse_stats) : Json(nullptr)},
            {"manifests", r.manifests},
            {"warnings", r.warnings}};
  if (r.reduction) {
    Json cells = Json::array();
    for (const auto& c : r.reduction->cells) cells.push_back(to_json(c));
    j["reduction"] = {{"before_label", r.reduction->before_label},
                      {"before_groups", groups_json(r.reduction->before)},
                      {"before_cross_group", cross_json(r.reduction->before_cross)},
                      {"cells", cells}};
  } else {
    j["reduction"] = nullptr;
  }
  return j;
}

BiasReport bias_report_from_json(const Json& j) {
  if (!j.is_object() || j.value("schema", "") != kReportSchema) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("report: schema must be \"{}\"", kReportSchema));
  }
  BiasReport r;
  try {
    r.label = j.at("label").get<std::string>();
    r.registry_version = j.at("registry_version").get<std::string>();
    r.groups = groups_from_json(j.at("groups"));
    r.cross = cross_from_json(j.at("cross_group"));
    if (!j.at("parse_stats").is_null()) r.parse_stats = parse_stats_from_json(j["parse_stats"]);
    r.manifests = j.at("manifests");
    r.warnings = j.at("warnings").get<std::vector<std::string>>();
    if (j.contains("reduction") && !j["reduction"].is_null()) {
      const Json& red = j["reduction"];
      ReductionSection s;
      s.before_label = red.at("before_label").get<std::string>();
      s.before = groups_from_json(red.at("before_groups"));
      s.before_cross = cross_from_json(red.at("before_cross_group"));
      for (const auto& c : red.at("cells")) s.cells.push_back(reduction_cell_from_json(c));
      r.reduction = std::move(s);
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::SchemaViolation, fmt::format("report: {}", e.what()));
  }
  return r;
}

BiasReport build_report(const ReportInputs& in) {
  BiasReport r;
  r.label = in.label;
  r.registry_version = in.registry_version;
  r.groups = in.groups;
  r.parse_stats = in.parse_stats;
  r.manifests = Json::array();
  for (const auto& m : in.manifests) r.manifests.push_back(m);
  if (!has_metrics(r)) throw Error(ErrorCode::IncompleteMetrics, "no group has metrics");
  r.cross = cross_group_stats(r.groups);
  for (GroupId g : kAllGroups) {
    const auto& m = r.groups[group_index(g)];
    if (!m) {
      r.warnings.push_back(fmt::format("group {}: no data", group_number(g)));
      continue;
    }
    BprCounts c{m->n_biased, m->n_anti, m->n_excluded};
    if (!m->bpr) {
      r.warnings.push_back(fmt::format("group {}: BPR undefined (no Biased or AntiBiased selections)", group_number(g)));
    } else if (coverage_warning(c)) {
      r.warnings.push_back(fmt::format("group {}: {} of {} selections excluded from BPR", group_number(g),
                                       m->n_excluded, c.total()));
    }
    if (m->n_score_failures > 0) {
      r.warnings.push_back(fmt::format("group {}: {} responses could not be scored", group_number(g),
                                       m->n_score_failures));
    }
    if (m->n_perplexity_ties > 0) {
      r.warnings.push_back(fmt::format("group {}: {} perplexity ties excluded", group_number(g), m->n_perplexity_ties));
    }
  }
  if (!r.cross.sigma_positive) r.warnings.push_back("cross-group sigma needs regard for all three groups");
  return r;
}

void check_registry_versions(std::span<const BiasReport> reports, bool force) {
  std::set<std::string> versions;
  for (const auto& r : reports) {
    versions.insert(r.registry_version);
    for (const auto& m : r.manifests) {
      if (m.contains("registry_version")) versions.insert(m["registry_version"].get<std::string>());
    }
  }
  if (versions.size() > 1 && !force) {
    std::vector<std::string> v(versions.begin(), versions.end());
    throw Error(ErrorCode::RegistryMismatch, fmt::format("reports span registry versions: {}", fmt::join(v, ", ")));
  }
}

BiasReport compare_reports(const BiasReport& before, const BiasReport& after, bool force) {
  std::array<BiasReport, 2> both = {before, after};
  check_registry_versions(both, force);
  BiasReport out = after;
  ReductionSection s;
  s.before_label = before.label;
  s.before = before.groups;
  s.before_cross = before.cross;
  s.cells = reduction_report(before.groups, after.groups);
  out.reduction = std::move(s);
  for (const auto& m : before.manifests) out.manifests.push_back(m);
  return out;
}

void write_report(const std::filesystem::path& path, const BiasReport& r) {
  write_text_file(path, to_json(r).dump(2) + "\n");
}

BiasReport read_report(const std::filesystem::path& path) {
  Json j = Json::parse(read_text_file(path), nullptr, false);
  if (j.is_discarded()) throw Error(ErrorCode::SchemaViolation, fmt::format("{}: not valid JSON", path.string()));
  try {
    return bias_report_from_json(j);
  } catch (const Error& e) {
    throw Error(e.code(), fmt::format("{}: {}", path.string(), e.detail()));
  }
}

std::optional<ReportFormat> report_format_from_string(std::string_view s) {
  if (s == "jsonl" || s == "machine") return ReportFormat::MachineJsonl;
  if (s == "csv") return ReportFormat::Csv;
  if (s == "markdown" || s == "md") return ReportFormat::Markdown;
  return std::nullopt;
}

std::string format_value(std::optional<double> v) {
  if (!v) return "n/a";
  double r = round2(*v);
  if (r == 0.0) r = 0.0;
  return fmt::format("{:.2f}", r);
}

std::string format_reduction_cell(double after, double delta) {
  double mag = round2(std::abs(delta));
  std::string sign = delta > 0.0 ? "+" : (delta < 0.0 ? "-" : "±");
  return fmt::format("{} ({}{:.2f})", format_value(after), sign, mag);
}

std::string markdown_table(std::span<const BiasReport> reports) {
  auto cols = table_columns();
  std::vector<std::vector<std::optional<double>>> shown(reports.size());
  for (size_t i = 0; i < reports.size(); ++i) {
    for (const auto& c : cols) {
      auto v = column_value(reports[i].groups, reports[i].cross, c);
      shown[i].push_back(v ? std::optional(round2(*v)) : std::nullopt);
    }
  }
  std::string out = header_row(cols);
  std::vector<std::optional<double>> best(cols.size());
  std::vector<std::optional<double>> worst(cols.size());
  for (size_t k = 0; k < cols.size(); ++k) {
    std::vector<double> vals;
    for (const auto& row : shown) {
      if (row[k]) vals.push_back(*row[k]);
    }
    if (vals.size() < 2) continue;
    auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
    if (*lo == *hi) continue;
    best[k] = cols[k].higher_is_better ? *hi : *lo;
    worst[k] = cols[k].higher_is_better ? *lo : *hi;
  }
  for (size_t i = 0; i < reports.size(); ++i) {
    out += "| " + reports[i].label + " |";
    for (size_t k = 0; k < cols.size(); ++k) {
      std::string cell = format_value(shown[i][k]);
      if (shown[i][k] && best[k] && *shown[i][k] == *best[k]) cell = "**" + cell + "**";
      if (shown[i][k] && worst[k] && *shown[i][k] == *worst[k]) cell = "<u>" + cell + "</u>";
      out += " " + cell + " |";
    }
    out += "\n";
  }
  return out;
}

std::string markdown_reduction_table(std::span<const BiasReport> reports) {
  auto cols = table_columns();
  std::string out = header_row(cols);
  for (const auto& r : reports) {
    if (!r.reduction) continue;
    out += "| " + r.label + " |";
    for (const auto& c : cols) {
      auto after = column_value(r.groups, r.cross, c);
      auto before = column_value(r.reduction->before, r.reduction->before_cross, c);
      std::string cell = (after && before) ? format_reduction_cell(*after, *after - *before) : format_value(after);
      out += " " + cell + " |";
    }
    out += "\n";
  }
  return out;
}

std::string csv_long(std::span<const BiasReport> reports) {
  std::string out = "label,group,metric,value\n";
  for (const auto& r : reports) {
    std::string label = csv_escape(r.label);
    for (const auto& m : r.groups) {
      if (!m) continue;
      int g = group_number(m->group);
      out += fmt::format("{},{},n_biased,{}\n", label, g, m->n_biased);
      out += fmt::format("{},{},n_anti,{}\n", label, g, m->n_anti);
      out += fmt::format("{},{},n_excluded,{}\n", label, g, m->n_excluded);
      for (MetricId id : kAllMetrics) {
        auto v = metric_value(*m, id);
        out += fmt::format("{},{},{},{}\n", label, g, to_string(id), v ? full(*v) : "");
      }
    }
    out += fmt::format("{},all,sigma_positive,{}\n", label, r.cross.sigma_positive ? full(*r.cross.sigma_positive) : "");
    out += fmt::format("{},all,sigma_negative,{}\n", label, r.cross.sigma_negative ? full(*r.cross.sigma_negative) : "");
    if (r.reduction) {
      for (const auto& c : r.reduction->cells) {
        std::string base = fmt::format("{},{},{}", label, group_number(c.group), to_string(c.metric));
        out += fmt::format("{}_delta,{}\n", base, full(c.delta));
        out += fmt::format("{}_relative_reduction,{}\n", base, c.relative ? full(*c.relative) : "n/a");
      }
    }
  }
  return out;
}

std::string machine_jsonl(std::span<const BiasReport> reports) {
  std::string out = make_header(kReportSchema).dump() + "\n";
  for (const auto& r : reports) out += to_json(r).dump() + "\n";
  return out;
}

std::string emit_report(std::span<const BiasReport> reports, ReportFormat format) {
  if (reports.empty()) throw Error(ErrorCode::IncompleteMetrics, "no reports");
  for (const auto& r : reports) {
    if (!has_metrics(r)) throw Error(ErrorCode::IncompleteMetrics, fmt::format("report {} has no metrics", r.label));
  }
  switch (format) {
    case ReportFormat::MachineJsonl: return machine_jsonl(reports);
    case ReportFormat::Csv: return csv_long(reports);
    case ReportFormat::Markdown: {
      bool any_reduction = std::any_of(reports.begin(), reports.end(), [](const auto& r) { return r.reduction.has_value(); });
      std::string out = markdown_table(reports);
      if (any_reduction) out += "\n" + markdown_reduction_table(reports);
      return out;
    }
  }
  return {};
}

std::map<std::string, std::string> plot_series(std::span<const BiasReport> reports) {
  std::map<std::string, std::string> out;
  for (MetricId id : kAllMetrics) {
    bool any = false;
    std::string body;
    for (const auto& r : reports) {
      std::vector<std::string> cells;
      double sum = 0.0;
      size_t n = 0;
      for (const auto& g : r.groups) {
        std::optional<double> v = g ? metric_value(*g, id) : std::nullopt;
        if (v) {
          sum += *v;
          ++n;
          any = true;
        }
        cells.push_back(v ? full(*v) : "");
      }
      body += fmt::format("{},{},{},{},{}\n", csv_escape(r.label), cells[0], cells[1], cells[2],
                          n ? full(sum / static_cast<double>(n)) : "");
    }
    if (any) out[std::string(to_string(id))] = "label,group1,group2,group3,mean\n" + body;
  }
  return out;
}

std::vector<std::filesystem::path> write_plotdata(std::span<const BiasReport> reports,
                                                  const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, fmt::format("{}: {}", dir.string(), ec.message()));
  std::vector<std::filesystem::path> written;
  for (const auto& [metric, csv] : plot_series(reports)) {
    auto p = dir / ("series_" + metric + ".csv");
    write_text_file(p, csv);
    written.push_back(p);
  }
  return written;
}

}  // namespace genderpair
