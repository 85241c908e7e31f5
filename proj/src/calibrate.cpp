#include "delaudit/calibrate.hpp"

#include <algorithm>

#include "delaudit/errors.hpp"

namespace delaudit::calibrate {

std::map<std::string, double> rank_normalize(
    const std::map<std::string, double>& scores) {
  if (scores.empty()) {
    throw ContractError("rank_normalize: no scores");
  }
  std::vector<std::pair<double, const std::string*>> order;
  order.reserve(scores.size());
  for (const auto& [id, score] : scores) order.emplace_back(score, &id);
  std::sort(order.begin(), order.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  const double n = static_cast<double>(order.size());
  std::map<std::string, double> normalized;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && order[j].first == order[i].first) ++j;
    // Ranks are 1-based; a tie block [i, j) shares the average rank.
    double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      normalized[*order[k].second] = avg_rank / n;
    }
    i = j;
  }
  return normalized;
}

std::optional<double> score_for(const AuditRecord& record,
                                std::string_view method_id, bool normalized) {
  if (method_id == kEnsembleId) return record.belief.ensemble;
  Method m = method_from_string(method_id);
  const auto& pool = normalized ? record.belief.normalized : record.belief.raw;
  auto it = pool.find(m);
  if (it == pool.end()) return std::nullopt;
  return it->second;
}

ThresholdSpec belief_threshold(const std::vector<AuditRecord>& records,
                               std::string_view method_id,
                               bool use_normalized) {
  double sum = 0.0;
  int n = 0;
  for (const auto& r : records) {
    if (r.verdict.outcome != Outcome::Correct) continue;
    if (auto s = score_for(r, method_id, use_normalized)) {
      sum += *s;
      ++n;
    }
  }
  if (n == 0) {
    throw DataError("belief threshold undefined for " +
                    std::string(method_id) +
                    ": no correctly answered record carries a score");
  }
  ThresholdSpec spec;
  spec.method_or_ensemble = std::string(method_id);
  spec.threshold = sum / static_cast<double>(n);
  spec.n_correct_used = n;
  spec.normalized = use_normalized;
  return spec;
}

void classify(std::vector<AuditRecord>& records, const ThresholdSpec& spec) {
  for (auto& r : records) {
    auto s = score_for(r, spec.method_or_ensemble, spec.normalized);
    r.verdict.belief_used = s;
    r.verdict.threshold_used = spec.threshold;
    if (r.verdict.outcome != Outcome::Incorrect) {
      r.verdict.classification = Classification::None;
      if (r.verdict.outcome == Outcome::Rejected) {
        r.verdict.belief_used = std::nullopt;
      }
      continue;
    }
    r.verdict.classification = (s.has_value() && *s > spec.threshold)
                                   ? Classification::Delusion
                                   : Classification::Hallucination;
  }
}

void apply_rank_normalization(std::vector<AuditRecord>& records,
                              std::span<const Method> methods) {
  for (Method m : methods) {
    std::map<std::string, double> scores;
    for (const auto& r : records) {
      if (r.verdict.outcome == Outcome::Rejected) continue;
      auto it = r.belief.raw.find(m);
      if (it != r.belief.raw.end()) scores[r.item.id] = it->second;
    }
    if (scores.empty()) continue;
    auto normalized = rank_normalize(scores);
    for (auto& r : records) {
      auto it = normalized.find(r.item.id);
      if (it != normalized.end()) r.belief.normalized[m] = it->second;
    }
  }
}

void apply_ensemble(std::vector<AuditRecord>& records,
                    const EnsembleOptions& opts) {
  if (opts.methods.empty()) {
    throw ContractError("ensemble: no methods requested");
  }
  for (auto& r : records) {
    r.belief.ensemble = std::nullopt;
    r.belief.ensemble_partial = false;
    if (r.verdict.outcome == Outcome::Rejected) continue;
    // Incremental mean: exact pass-through when all inputs are identical.
    double mean = 0.0;
    int n = 0;
    for (Method m : opts.methods) {
      const auto& pool =
          opts.use_normalized ? r.belief.normalized : r.belief.raw;
      auto it = pool.find(m);
      if (it != pool.end()) {
        ++n;
        mean += (it->second - mean) / static_cast<double>(n);
      }
    }
    if (n == 0) continue;  // stays unscored; parse_failed for ensemble
    r.belief.ensemble = mean;
    r.belief.ensemble_partial = n < static_cast<int>(opts.methods.size());
  }
}

}  // namespace delaudit::calibrate
