#include "delaudit/protocols.hpp"

#include <algorithm>

#include "delaudit/errors.hpp"
#include "delaudit/estimators.hpp"

namespace delaudit::protocols {

std::optional<double> HonestyPromptResult::delusion_refuse_rate() const {
  if (n_delusion == 0) return std::nullopt;
  return static_cast<double>(refused_delusion) / n_delusion;
}

std::optional<double> HonestyPromptResult::hallucination_refuse_rate() const {
  if (n_hallucination == 0) return std::nullopt;
  return static_cast<double>(refused_hallucination) / n_hallucination;
}

double HonestyPromptResult::error_rate_now() const {
  return n_asked == 0 ? 0.0
                      : static_cast<double>(n_incorrect_now) / n_asked;
}

HonestyRun honesty_battery(client::ChatClient& chat,
                           const prompts::PromptLibrary& lib,
                           const std::vector<AuditRecord>& baseline,
                           const grading::GradingOptions& grading_opts,
                           const HonestyOptions& opts) {
  struct Selected {
    const AuditRecord* record;
    Classification base_class;
  };
  std::vector<Selected> selected;
  int skipped = 0;
  for (const auto& r : baseline) {
    bool is_error = r.verdict.outcome == Outcome::Incorrect;
    if (!opts.reask_all && !is_error) continue;
    if (is_error && r.verdict.classification == Classification::None) {
      // Baseline error without a delusion/hallucination label.
      ++skipped;
      continue;
    }
    selected.push_back(Selected{&r, r.verdict.classification});
  }

  HonestyRun run;
  for (const auto& [tag, tmpl] : lib.honesty_battery()) {
    std::vector<client::ChatRequest> requests;
    requests.reserve(selected.size());
    for (const auto& s : selected) {
      client::ChatRequest req;
      req.item_id = s.record->item.id;
      req.role_tag = RoleTag::Honesty;
      req.messages = tmpl->render({{"question", s.record->item.question}});
      req.sampling.max_tokens = 128;
      requests.push_back(std::move(req));
    }
    auto slots = chat.complete_batch(requests, opts.parallelism);

    HonestyPromptResult result;
    result.prompt_tag = tag;
    result.n_skipped = skipped;
    for (std::size_t i = 0; i < slots.size(); ++i) {
      const auto& s = selected[i];
      if (!slots[i].ok()) {
        ++result.n_skipped;
        continue;
      }
      const GenerationTrace& trace = slots[i].trace();
      run.traces.push_back(trace);
      ++result.n_asked;
      Outcome now = grading::grade(trace.output_text, s.record->item,
                                   grading_opts);
      switch (now) {
        case Outcome::Correct: ++result.n_correct_now; break;
        case Outcome::Incorrect: ++result.n_incorrect_now; break;
        case Outcome::Rejected: ++result.n_rejected_now; break;
      }
      if (s.base_class == Classification::Delusion) {
        ++result.n_delusion;
        if (now == Outcome::Rejected) ++result.refused_delusion;
      } else if (s.base_class == Classification::Hallucination) {
        ++result.n_hallucination;
        if (now == Outcome::Rejected) ++result.refused_hallucination;
      }
    }
    run.per_prompt.push_back(std::move(result));
  }
  return run;
}

std::string_view to_string(ReflectionKind k) {
  switch (k) {
    case ReflectionKind::Insist: return "insist";
    case ReflectionKind::RevisedCorrect: return "revised_correct";
    case ReflectionKind::RevisedIncorrect: return "revised_incorrect";
    case ReflectionKind::RevisedReject: return "revised_reject";
  }
  throw ContractError("unknown ReflectionKind");
}

client::ChatRequest build_reflection_request(
    const prompts::PromptLibrary& lib, const QAItem& item,
    const std::string& previous_answer) {
  client::ChatRequest req;
  req.item_id = item.id;
  req.role_tag = RoleTag::Reflection;
  req.messages = lib.get(prompts::TemplateId::Reflection)
                     .render({{"question", item.question},
                              {"previous_answer", previous_answer}});
  req.sampling.max_tokens = 128;
  return req;
}

ReflectionOutcome classify_reflection(const QAItem& item,
                                      const std::string& previous_answer,
                                      const std::string& reflection_output,
                                      const grading::GradingOptions& opts) {
  ReflectionOutcome out;
  out.item_id = item.id;
  out.reflection_output = reflection_output;

  std::string canon_output = grading::canonical_form(reflection_output);
  if (canon_output.find("i insist") != std::string::npos ||
      canon_output == grading::canonical_form(previous_answer)) {
    out.outcome = ReflectionKind::Insist;
    return out;
  }
  switch (grading::grade(reflection_output, item, opts)) {
    case Outcome::Correct: out.outcome = ReflectionKind::RevisedCorrect; break;
    case Outcome::Incorrect:
      out.outcome = ReflectionKind::RevisedIncorrect;
      break;
    case Outcome::Rejected: out.outcome = ReflectionKind::RevisedReject; break;
  }
  return out;
}

ReflectionRun reflect_all(client::ChatClient& chat,
                          const prompts::PromptLibrary& lib,
                          const std::vector<AuditRecord>& baseline,
                          const grading::GradingOptions& grading_opts,
                          int parallelism) {
  std::vector<const AuditRecord*> selected;
  std::vector<client::ChatRequest> requests;
  for (const auto& r : baseline) {
    if (r.verdict.outcome == Outcome::Rejected) continue;
    const GenerationTrace* answer = r.answer_trace();
    if (answer == nullptr) continue;
    selected.push_back(&r);
    requests.push_back(
        build_reflection_request(lib, r.item, answer->output_text));
  }

  ReflectionRun run;
  auto slots = chat.complete_batch(requests, parallelism);
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (!slots[i].ok()) continue;  // unevaluated
    const GenerationTrace& trace = slots[i].trace();
    run.traces.push_back(trace);
    run.outcomes.push_back(classify_reflection(
        selected[i]->item, selected[i]->answer_trace()->output_text,
        trace.output_text, grading_opts));
  }
  return run;
}

void VoteConfig::validate() const {
  if (verifier_endpoints.empty()) {
    throw ConfigError("voting requires at least one verifier endpoint");
  }
  if (threshold < 1 ||
      threshold > static_cast<int>(verifier_endpoints.size())) {
    throw ConfigError("vote threshold must be in [1, #verifiers]");
  }
}

bool vote_keep(int match_count, int threshold) {
  return match_count >= threshold;
}

VoteOutcome vote_verify(const QAItem& item, const std::string& target_answer,
                        const VoteConfig& config,
                        std::vector<client::ChatClient>& verifiers,
                        const prompts::PromptLibrary& lib) {
  config.validate();
  if (verifiers.size() != config.verifier_endpoints.size()) {
    throw ContractError("vote_verify: verifier client count mismatch");
  }

  VoteOutcome out;
  out.item_id = item.id;
  out.threshold = config.threshold;
  for (std::size_t v = 0; v < verifiers.size(); ++v) {
    VoteOutcome::VerifierResult result;
    result.model_name = config.verifier_endpoints[v].model_name;
    client::ChatRequest req = estimators::build_answer_request(lib, item);
    req.role_tag = RoleTag::Verifier;
    req.want_logprobs = false;
    try {
      GenerationTrace trace = verifiers[v].complete(req);
      result.answer = trace.output_text;
      result.matched = grading::answers_match(trace.output_text, target_answer,
                                              config.strict_match);
    } catch (const TransportError&) {
      result.failed = true;
      result.matched = false;
    }
    out.verifiers.push_back(std::move(result));
  }
  out.kept = vote_keep(out.match_count(), config.threshold);
  return out;
}

client::ChatRequest build_rag_request(const prompts::PromptLibrary& lib,
                                      const QAItem& item) {
  if (!item.passages.has_value() || item.passages->empty()) {
    throw ContractError("rag: item " + item.id + " has no passages");
  }
  client::ChatRequest req;
  req.item_id = item.id;
  req.role_tag = RoleTag::Rag;
  req.messages =
      lib.get(prompts::TemplateId::Rag)
          .render({{"question", item.question},
                   {"passages", prompts::render_passages_block(*item.passages)}});
  req.sampling.max_tokens = 128;
  req.want_logprobs = true;
  return req;
}

}  // namespace delaudit::protocols
