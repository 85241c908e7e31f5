#pragma once

#include <string>
#include <vector>

#include "delaudit/embed.hpp"
#include "delaudit/noise.hpp"

namespace delaudit::noise {

struct DelusionExample {
  std::string id;
  std::string question;
  std::string answer;
};

struct DedupRemoval {
  std::string record_id;
  std::string trigger;  // "answer-match" or "similarity"
  std::string matched_delusion_id;
  double similarity = 0.0;
};

struct DedupResult {
  std::vector<TrainingRecord> kept;
  std::vector<DedupRemoval> removed;
};

struct DedupOptions {
  double sim_threshold = 0.9;  // strict >, equal similarity is kept
  bool embed_qa = false;       // embed question+answer instead of question
};

/// Removes every record whose canonical answer equals a delusion example's
/// canonical answer, or whose embedding similarity to any delusion
/// example's question exceeds the threshold. Refining the refined set
/// removes nothing further.
DedupResult dedup_refine(const std::vector<TrainingRecord>& records,
                         const std::vector<DelusionExample>& delusions,
                         Embedder& embedder, const DedupOptions& opts = {});

/// CSV: record_id,trigger,matched_delusion_id,similarity
void write_removal_report_csv(const std::string& path,
                              const std::vector<DedupRemoval>& removals);

/// Delusion examples from a record file (classification == delusion;
/// answer = first gold alias) or from plain JSONL {"id","question","answer"}.
std::vector<DelusionExample> load_delusion_examples(const std::string& path);

}  // namespace delaudit::noise
