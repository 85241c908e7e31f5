#pragma once

#include <optional>
#include <string>
#include <vector>

#include "delaudit/calibrate.hpp"
#include "delaudit/client.hpp"
#include "delaudit/protocols.hpp"
#include "delaudit/report.hpp"
#include "delaudit/types.hpp"

namespace delaudit::pipeline {

struct RunConfig {
  client::EndpointConfig endpoint;
  std::string dataset_path;
  std::vector<Method> methods = {Method::RawLogits};
  std::optional<std::vector<Method>> ensemble_methods;
  bool normalized = true;
  int consistency_n = 10;
  std::uint64_t seed = 0;
  std::string output_dir;
  int top_logprobs_k = 10;
  int parallelism = 0;  // 0 = endpoint.max_parallel
  bool verb1s_own_answer = false;
  bool strict_em = false;
  std::string share_dir;             // "" = default
  std::string refusal_lexicon_path;  // "" = built-in defaults
  std::string classify_with;  // "" = ensemble when configured, else methods[0]
  bool rag = false;           // answer via the retrieval prompt

  void validate() const;  // throws ConfigError
  std::string effective_classify_with() const;
};

struct AuditOutput {
  std::vector<AuditRecord> records;
  std::vector<calibrate::ThresholdSpec> threshold_specs;
  report::RunReport run_report;
};

/// Full audit: greedy answers, requested estimators, rank normalization,
/// thresholds, classification, aggregation. Per-item failures become
/// warnings (and parse_failed methods), not run aborts.
AuditOutput run_audit(const RunConfig& cfg);

/// Re-scores saved records without touching the endpoint: grading,
/// estimator scores, normalization, thresholds and verdicts are all
/// recomputed from the stored traces.
AuditOutput rescore(const RunConfig& cfg, std::vector<AuditRecord> records);

/// Writes records.jsonl plus report.{json,csv,md} into cfg.output_dir.
void write_outputs(const RunConfig& cfg, const AuditOutput& out);

/// load_records + rescore for a previous run directory.
AuditOutput load_baseline(const RunConfig& cfg, const std::string& run_dir);

/// Honesty battery over a baseline run. Writes honesty_traces.jsonl and a
/// report carrying the per-prompt refuse rates into cfg.output_dir.
report::RunReport run_honesty(const RunConfig& cfg,
                              const AuditOutput& baseline,
                              const protocols::HonestyOptions& opts);

/// Reflection over every answered baseline item. Writes
/// reflect_traces.jsonl, reflect_outcomes.jsonl and a report with per-class
/// outcome distributions. Baseline verdicts are never modified.
report::RunReport run_reflect(const RunConfig& cfg,
                              const AuditOutput& baseline);

/// Multi-agent voting over a baseline run: discarded answers become
/// Rejected, vote outcomes are stored per record, and the post-mitigation
/// report (classified with the baseline thresholds) plus the delta against
/// the baseline land in cfg.output_dir.
report::RunReport run_debate(const RunConfig& cfg, AuditOutput baseline,
                             const protocols::VoteConfig& vote_config);

}  // namespace delaudit::pipeline
