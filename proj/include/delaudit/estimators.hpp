#pragma once

#include <optional>
#include <string>
#include <vector>

#include "delaudit/client.hpp"
#include "delaudit/prompts.hpp"
#include "delaudit/types.hpp"

namespace delaudit::estimators {

// Scoring functions are pure over traces: recomputing from saved traces
// reproduces scores bit-identically.

/// exp(mean of token logprobs), the reciprocal of perplexity. Range (0,1].
/// Throws DataError when the trace has no logprobs.
double raw_logits_belief(const GenerationTrace& trace);

struct AgreementResult {
  double belief = 0.0;
  std::string modal_answer;
};

/// Fraction of answers equal to the most frequent answer. Answers must
/// already be in canonical (grading) form. Ties pick the tied group holding
/// the lexicographically smallest answer. Throws ContractError when empty.
AgreementResult agreement_belief(const std::vector<std::string>& answers);

struct PTruePair {
  double p_true = 0.0;
  double p_false = 0.0;  // p_true + p_false == 1 by construction
};

/// Pair-softmax over the best True-variant and False-variant tokens at the
/// first generated position (case-insensitive, whitespace-stripped prefix
/// match on "true"/"false"). When a variant is missing from the
/// alternatives, falls back to the output text: an output starting with a
/// True variant scores 1, a False variant 0. Returns nullopt when neither
/// route applies (the method is then parse_failed).
std::optional<PTruePair> p_true_from_trace(const GenerationTrace& trace);

/// Extracts a verbalized confidence from free text: the last number next to
/// a '%' sign wins; otherwise the last number in [0,100] after a confidence
/// keyword ("confidence", "confident", "certainty"). Scaled to [0,1] and
/// clamped. Returns nullopt when nothing parses.
std::optional<double> parse_confidence(std::string_view text);

// Request builders. Sampling follows the run conventions: greedy answers
// with max_tokens 128; consistency samples at temperature 0.7, top_p 0.95,
// top_k 40.

client::ChatRequest build_answer_request(const prompts::PromptLibrary& lib,
                                         const QAItem& item);

client::ChatRequest build_p_true_request(const prompts::PromptLibrary& lib,
                                         const QAItem& item,
                                         const std::string& answer,
                                         int top_logprobs_k);

client::ChatRequest build_verb_1s_request(const prompts::PromptLibrary& lib,
                                          const QAItem& item);

client::ChatRequest build_verb_2s_request(const prompts::PromptLibrary& lib,
                                          const QAItem& item,
                                          const std::string& previous_answer);

/// One request carrying sampling.n = n; n must be >= 2.
client::ChatRequest build_consistency_request(
    const prompts::PromptLibrary& lib, const QAItem& item, int n,
    std::optional<std::uint64_t> seed);

/// Convenience wrapper issuing the consistency request.
std::vector<GenerationTrace> consistency_samples(
    client::ChatClient& chat, const prompts::PromptLibrary& lib,
    const QAItem& item, int n, std::optional<std::uint64_t> seed);

}  // namespace delaudit::estimators
