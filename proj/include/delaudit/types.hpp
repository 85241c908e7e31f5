#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace delaudit {

/// The five belief estimation methods.
enum class Method { RawLogits, Agreement, PTrue, Verb1S, Verb2S };

inline constexpr std::array<Method, 5> kAllMethods = {
    Method::RawLogits, Method::Agreement, Method::PTrue, Method::Verb1S,
    Method::Verb2S};

/// Identifier used wherever a threshold or report column can refer to the
/// ensembled belief instead of a single method.
inline constexpr std::string_view kEnsembleId = "ensemble";

std::string_view to_string(Method m);
Method method_from_string(std::string_view s);  // throws ConfigError

/// What a generation was asked for. One audit record can hold several traces
/// with different tags (the answer, p_true judgment, consistency samples...).
enum class RoleTag {
  Answer,
  PTrue,
  ConsistencySample,
  Verb1S,
  Verb2S,
  Honesty,
  Reflection,
  Rag,
  Verifier,
};

std::string_view to_string(RoleTag t);
RoleTag role_tag_from_string(std::string_view s);

enum class Outcome { Correct, Incorrect, Rejected };
enum class Classification { None, Hallucination, Delusion };

std::string_view to_string(Outcome o);
Outcome outcome_from_string(std::string_view s);
std::string_view to_string(Classification c);
Classification classification_from_string(std::string_view s);

struct Message {
  std::string role;
  std::string text;
  bool operator==(const Message&) const = default;
};

struct SamplingParams {
  double temperature = 0.0;
  double top_p = 1.0;
  int top_k = 0;  // 0 = disabled
  int max_tokens = 128;
  int n = 1;
  std::optional<std::uint64_t> seed;

  bool greedy() const { return temperature == 0.0; }
  bool operator==(const SamplingParams&) const = default;
};

struct TokenLogprob {
  std::string token;
  double logprob = 0.0;  // always <= 0
  std::vector<std::pair<std::string, double>> top_alternatives;
  bool operator==(const TokenLogprob&) const = default;
};

/// One model completion, with enough context to re-score it offline.
struct GenerationTrace {
  std::string item_id;
  RoleTag role_tag = RoleTag::Answer;
  std::vector<Message> prompt_messages;
  std::string output_text;
  std::vector<TokenLogprob> token_logprobs;
  SamplingParams sampling;
  std::string created_at;  // UTC ISO-8601
  int retry_count = 0;
  bool top_k_omitted = false;
  bool operator==(const GenerationTrace&) const = default;
};

/// One dataset question with its gold answer aliases.
struct QAItem {
  std::string id;
  std::string question;
  std::vector<std::string> gold_answers;
  std::optional<std::vector<std::string>> passages;
  std::string source;
  bool operator==(const QAItem&) const = default;
};

/// Per-method belief scores for one item. A method appears in `raw` only if
/// a score was extracted; extraction failures go to `parse_failed` instead.
/// `normalized` is populated by rank normalization over a whole run.
struct BeliefVector {
  std::string item_id;
  std::map<Method, double> raw;
  std::map<Method, double> normalized;
  std::optional<double> ensemble;
  bool ensemble_partial = false;
  std::set<Method> parse_failed;
  bool operator==(const BeliefVector&) const = default;
};

struct Verdict {
  std::string item_id;
  Outcome outcome = Outcome::Incorrect;
  Classification classification = Classification::None;
  std::optional<double> belief_used;
  std::optional<double> threshold_used;
  bool operator==(const Verdict&) const = default;
};

/// Result of multi-agent voting for one item.
struct VoteOutcome {
  struct VerifierResult {
    std::string model_name;
    std::string answer;
    bool matched = false;
    bool failed = false;  // transport failure; counts as non-match
    bool operator==(const VerifierResult&) const = default;
  };
  std::string item_id;
  std::vector<VerifierResult> verifiers;
  int threshold = 0;
  bool kept = true;
  bool operator==(const VoteOutcome&) const = default;

  int match_count() const {
    int n = 0;
    for (const auto& v : verifiers) n += v.matched ? 1 : 0;
    return n;
  }
};

/// Everything the toolkit knows about one audited item.
struct AuditRecord {
  QAItem item;
  std::vector<GenerationTrace> traces;
  BeliefVector belief;
  Verdict verdict;
  std::optional<VoteOutcome> vote;
  bool operator==(const AuditRecord&) const = default;

  /// First trace with the given tag, or nullptr.
  const GenerationTrace* find_trace(RoleTag tag) const;

  /// The trace holding the graded answer: role answer, or rag for RAG runs.
  const GenerationTrace* answer_trace() const;
};

}  // namespace delaudit
