#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "delaudit/types.hpp"

namespace delaudit::noise {

/// Controls for synthesized wrong-answer training sets. `level` sets how
/// concentrated the noise is: the fraction of a noisy item's variants that
/// share one identical perturbed answer (1: 25%, 2: 50%, 3: 75%, 4: 100%).
struct NoiseSpec {
  double proportion = 1.0;       // fraction of items made noisy
  int level = 4;                 // 1..4
  int variants_per_item = 20;
  std::uint64_t seed = 0;

  double identical_fraction() const;
  void validate() const;  // throws ConfigError
};

/// One chat-style training example.
struct TrainingRecord {
  std::string id;          // item id, or item_id#k for noise variants
  std::string question;    // user message
  std::string answer;      // assistant message
  std::string label;       // classification tag carried from the source
                           // record ("" when not applicable)
  bool noisy = false;
};

/// Applies one uniformly chosen single-character edit (insert, delete, or
/// replace) and returns a string at edit distance exactly 1 from the input.
/// Digits perturb to digits and letters to same-case letters; delete is
/// never chosen for single-character answers. Throws ContractError on an
/// empty answer.
std::string perturb_answer(std::string_view answer, std::mt19937_64& rng);

struct NoiseSet {
  std::vector<TrainingRecord> records;
  std::vector<std::string> warnings;
};

/// Seed-stable synthesis: a `proportion` fraction of items (rounded to
/// nearest) becomes noisy and emits variants_per_item perturbed records,
/// of which ceil(identical_fraction x variants_per_item) share one answer
/// and the rest are distinct perturbations; other items emit one clean
/// record with their first gold answer.
NoiseSet synthesize_noise_set(const std::vector<QAItem>& items,
                              const NoiseSpec& spec);

struct SftSpec {
  double refuse_ratio = 0.5;  // in (0,1)
  int total = 0;
  std::uint64_t seed = 0;
  std::string refusal_text = "I don't know";
};

/// Builds a refusal-SFT set from graded records: round(refuse_ratio x
/// total) incorrect-question records target the refusal text, the rest
/// correct-question records target their gold answer. Each record carries
/// the source classification label. Throws DataError naming the short side
/// when a pool is too small.
std::vector<TrainingRecord> build_refusal_sft_set(
    const std::vector<AuditRecord>& records, const SftSpec& spec);

/// Training files are plain JSONL (no header line) so fine-tuning stacks
/// can consume them directly:
///   {"id":..., "label":..., "noisy":..., "messages":[{role,content}...]}
void save_training_records(const std::vector<TrainingRecord>& records,
                           const std::string& path);
std::vector<TrainingRecord> load_training_records(const std::string& path);

}  // namespace delaudit::noise
