#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "delaudit/types.hpp"

namespace delaudit::calibrate {

/// Maps scores to average-rank / N with ranks ascending in score (rank 1 =
/// lowest) and ties sharing the average rank of their block. Output is
/// strictly monotone in score with range in (0,1]. Throws ContractError on
/// empty input.
std::map<std::string, double> rank_normalize(
    const std::map<std::string, double>& scores);

struct ThresholdSpec {
  std::string method_or_ensemble;
  double threshold = 0.0;
  int n_correct_used = 0;
  bool normalized = true;
};

/// The score a record holds for `method_id` ("ensemble" or a method name)
/// in the requested space. nullopt when unscored.
std::optional<double> score_for(const AuditRecord& record,
                                std::string_view method_id, bool normalized);

/// Mean belief over correctly answered records; rejected and incorrect
/// records never contribute. Throws DataError when no correct record has a
/// score for the method.
ThresholdSpec belief_threshold(const std::vector<AuditRecord>& records,
                               std::string_view method_id,
                               bool use_normalized);

/// Sets Verdict.classification from the threshold: incorrect records with
/// belief strictly above the threshold become Delusion, all other incorrect
/// records (including unscored ones) Hallucination, everything else None.
void classify(std::vector<AuditRecord>& records, const ThresholdSpec& spec);

/// Fills BeliefVector.normalized for each requested method by rank
/// normalization over the whole run. Rejected items are excluded from the
/// rank pool (they carry no answer belief), as are parse_failed items.
void apply_rank_normalization(std::vector<AuditRecord>& records,
                              std::span<const Method> methods);

struct EnsembleOptions {
  std::vector<Method> methods;
  bool use_normalized = true;
};

/// Per-item arithmetic mean of the available requested scores. Items with
/// some methods missing are flagged partial; items with none stay unscored
/// (ensemble == nullopt).
void apply_ensemble(std::vector<AuditRecord>& records,
                    const EnsembleOptions& opts);

}  // namespace delaudit::calibrate
