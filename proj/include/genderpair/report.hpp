#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "genderpair/metrics.hpp"

namespace genderpair {

inline constexpr std::string_view kReportSchema = "genderpair-report/1";

struct ReductionSection {
  std::string before_label;
  std::array<std::optional<GroupMetrics>, 3> before;
  CrossGroupStats before_cross;
  std::vector<ReductionCell> cells;
  bool operator==(const ReductionSection&) const = default;
};

struct BiasReport {
  std::string label;
  std::string registry_version;
  std::array<std::optional<GroupMetrics>, 3> groups;
  CrossGroupStats cross;
  std::optional<ParseStats> parse_stats;
  Json manifests = Json::array();  // manifests of every input run
  std::vector<std::string> warnings;
  std::optional<ReductionSection> reduction;

  bool operator==(const BiasReport&) const = default;
};

Json to_json(const BiasReport& r);
BiasReport bias_report_from_json(const Json& j);

struct ReportInputs {
  std::string label;
  std::string registry_version;
  std::array<std::optional<GroupMetrics>, 3> groups;
  std::optional<ParseStats> parse_stats;
  std::vector<Json> manifests;
};

// Computes cross-group stats and warnings. Throws IncompleteMetrics when no group has metrics.
BiasReport build_report(const ReportInputs& in);

// Throws RegistryMismatch unless every report shares one registry version or `force` is set.
void check_registry_versions(std::span<const BiasReport> reports, bool force);

// After-report carrying a reduction section against `before`. Throws MetricMismatch.
BiasReport compare_reports(const BiasReport& before, const BiasReport& after, bool force = false);

void write_report(const std::filesystem::path& path, const BiasReport& r);
BiasReport read_report(const std::filesystem::path& path);

enum class ReportFormat : uint8_t { MachineJsonl, Csv, Markdown };
std::optional<ReportFormat> report_format_from_string(std::string_view s);

// Two decimals, half away from zero, no negative zero; "n/a" for missing.
std::string format_value(std::optional<double> v);
// "0.30 (-0.26)", "0.71 (+0.46)"; the sign follows the unrounded delta, exact zero renders "±0.00".
std::string format_reduction_cell(double after, double delta);

// Columns: Model | BPR x3 | Toxicity x3 | Regard positive x3 + sigma | Regard negative x3 + sigma.
// Per column the best value is bold and the worst underlined.
std::string markdown_table(std::span<const BiasReport> reports);
// Same columns; each cell is "after (signed delta)". Reports without a reduction section are skipped.
std::string markdown_reduction_table(std::span<const BiasReport> reports);
std::string csv_long(std::span<const BiasReport> reports);
std::string machine_jsonl(std::span<const BiasReport> reports);

// Throws IncompleteMetrics when a report has no group metrics.
std::string emit_report(std::span<const BiasReport> reports, ReportFormat format);

// One series file per metric present in any report: label,group1,group2,group3,mean. Gaps stay empty.
std::map<std::string, std::string> plot_series(std::span<const BiasReport> reports);
std::vector<std::filesystem::path> write_plotdata(std::span<const BiasReport> reports,
                                                  const std::filesystem::path& dir);

}  // namespace genderpair
