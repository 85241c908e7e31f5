#pragma once

#include <optional>
#include <string>
#include <vector>

#include "delaudit/client.hpp"
#include "delaudit/grading.hpp"
#include "delaudit/prompts.hpp"
#include "delaudit/types.hpp"

namespace delaudit::protocols {

// ---------------------------------------------------------------------------
// Honesty battery

struct HonestyPromptResult {
  std::string prompt_tag;
  int n_delusion = 0;        // baseline delusions re-asked
  int n_hallucination = 0;   // baseline hallucinations re-asked
  int refused_delusion = 0;
  int refused_hallucination = 0;
  int n_asked = 0;
  int n_correct_now = 0;
  int n_incorrect_now = 0;
  int n_rejected_now = 0;
  int n_skipped = 0;  // baseline-incorrect items without a class label

  std::optional<double> delusion_refuse_rate() const;
  std::optional<double> hallucination_refuse_rate() const;
  double error_rate_now() const;
};

struct HonestyOptions {
  bool reask_all = false;  // re-ask every item, not just baseline errors
  int parallelism = 0;
};

struct HonestyRun {
  std::vector<HonestyPromptResult> per_prompt;
  std::vector<GenerationTrace> traces;
};

/// Re-asks baseline-incorrect items under each of the six honesty prompts
/// and reports refuse rates per baseline class plus the error rate under
/// each prompt.
HonestyRun honesty_battery(client::ChatClient& chat,
                           const prompts::PromptLibrary& lib,
                           const std::vector<AuditRecord>& baseline,
                           const grading::GradingOptions& grading_opts,
                           const HonestyOptions& opts = {});

// ---------------------------------------------------------------------------
// Reflection

enum class ReflectionKind {
  Insist,
  RevisedCorrect,
  RevisedIncorrect,
  RevisedReject,
};

std::string_view to_string(ReflectionKind k);

struct ReflectionOutcome {
  std::string item_id;
  ReflectionKind outcome = ReflectionKind::Insist;
  std::string reflection_output;
};

client::ChatRequest build_reflection_request(const prompts::PromptLibrary& lib,
                                             const QAItem& item,
                                             const std::string& previous_answer);

/// Insist when the output contains "I insist" (canonicalized) or restates
/// the same canonical answer; otherwise the new answer is graded.
ReflectionOutcome classify_reflection(const QAItem& item,
                                      const std::string& previous_answer,
                                      const std::string& reflection_output,
                                      const grading::GradingOptions& opts);

struct ReflectionRun {
  std::vector<ReflectionOutcome> outcomes;
  std::vector<GenerationTrace> traces;
};

/// Reflects on every answered (non-rejected) baseline item. The baseline
/// verdicts are never modified; outcomes are reported separately.
ReflectionRun reflect_all(client::ChatClient& chat,
                          const prompts::PromptLibrary& lib,
                          const std::vector<AuditRecord>& baseline,
                          const grading::GradingOptions& grading_opts,
                          int parallelism = 0);

// ---------------------------------------------------------------------------
// Multi-agent voting

struct VoteConfig {
  std::vector<client::EndpointConfig> verifier_endpoints;
  int threshold = 2;  // minimum verifier matches to keep an answer
  bool strict_match = false;

  void validate() const;  // throws ConfigError
};

/// Discard when fewer than `threshold` matches. Exposed for the
/// monotonicity property: keep(threshold+1) implies keep(threshold).
bool vote_keep(int match_count, int threshold);

/// Asks every verifier the question (greedy, plain answer prompt) and
/// compares each verifier answer against the target answer with the
/// grading match rule. A verifier transport failure counts as a non-match
/// and is flagged.
VoteOutcome vote_verify(const QAItem& item, const std::string& target_answer,
                        const VoteConfig& config,
                        std::vector<client::ChatClient>& verifiers,
                        const prompts::PromptLibrary& lib);

// ---------------------------------------------------------------------------
// RAG

/// Builds the retrieval-augmented answer request; passages are rendered as
/// numbered documents. Throws ContractError when the item has no passages.
client::ChatRequest build_rag_request(const prompts::PromptLibrary& lib,
                                      const QAItem& item);

inline constexpr int kExpectedRagPassages = 20;

}  // namespace delaudit::protocols
