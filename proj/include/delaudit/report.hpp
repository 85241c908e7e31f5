#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "delaudit/calibrate.hpp"
#include "delaudit/types.hpp"

namespace delaudit::report {

struct MethodMetrics {
  double accuracy = 0.0;
  double error_rate = 0.0;
  double reject_rate = 0.0;
  double delusion_rate_overall = 0.0;
  std::optional<double> delusion_share_of_errors;  // null when no errors
  calibrate::ThresholdSpec threshold;
  int n_items = 0;
  int n_correct = 0;
  int n_incorrect = 0;
  int n_rejected = 0;
  int n_delusion = 0;
  int n_hallucination = 0;
  int n_parse_failed = 0;
};

struct RunReport {
  std::string run_id;
  std::string model_name;
  std::string dataset_tag;
  std::map<std::string, MethodMetrics> per_method;
  nlohmann::json protocol_sections;  // object; empty when no protocol ran
  std::vector<std::string> warnings;
};

/// Per-item outcome overrides for one method column, e.g. grading the
/// verb_1s answer instead of the shared greedy answer.
using OutcomeOverrides = std::map<std::string, std::map<std::string, Outcome>>;

/// Counts outcomes and classifications per threshold spec. Classification
/// runs on copies, so the stored verdicts are untouched. Records must share
/// one dataset tag; mixing tags is a contract error.
RunReport aggregate(const std::vector<AuditRecord>& records,
                    const std::vector<calibrate::ThresholdSpec>& specs,
                    const std::string& run_id, const std::string& model_name,
                    const OutcomeOverrides& overrides = {});

struct Delta {
  std::string method;
  std::string metric;
  std::optional<double> before;
  std::optional<double> after;
  std::optional<double> delta;
  bool worsened = false;
};

/// Per-metric absolute deltas for every method present in both reports.
/// Throws DataError when the dataset tags differ. reject_rate is reported
/// but never flagged as worsened (mitigations convert errors to
/// rejections on purpose).
std::vector<Delta> compare_runs(const RunReport& before,
                                const RunReport& after);

nlohmann::json report_to_json(const RunReport& report);
RunReport report_from_json(const nlohmann::json& j);
RunReport load_report(const std::string& path);

enum class Format { Json, Csv, Markdown };

/// Writes report.json / report.csv / report.md into `dir`. JSON is the
/// canonical dump (byte-stable under load+emit); CSV holds one row per
/// (method, metric); markdown renders methods as columns with delusion
/// rates as paired "overall / in-errors" cells.
void emit(const RunReport& report, const std::string& dir,
          const std::set<Format>& formats);

std::string render_markdown(const RunReport& report);
std::string render_csv(const RunReport& report);

std::string delta_table_markdown(const std::vector<Delta>& deltas);
nlohmann::json deltas_to_json(const std::vector<Delta>& deltas);

}  // namespace delaudit::report
