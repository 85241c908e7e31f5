#include "delaudit/types.hpp"

#include "delaudit/errors.hpp"

namespace delaudit {

std::string_view to_string(Method m) {
  switch (m) {
    case Method::RawLogits: return "raw_logits";
    case Method::Agreement: return "agreement";
    case Method::PTrue: return "p_true";
    case Method::Verb1S: return "verb_1s";
    case Method::Verb2S: return "verb_2s";
  }
  throw ContractError("unknown Method value");
}

Method method_from_string(std::string_view s) {
  for (Method m : kAllMethods) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown belief method: " + std::string(s));
}

std::string_view to_string(RoleTag t) {
  switch (t) {
    case RoleTag::Answer: return "answer";
    case RoleTag::PTrue: return "p_true";
    case RoleTag::ConsistencySample: return "consistency_sample";
    case RoleTag::Verb1S: return "verb_1s";
    case RoleTag::Verb2S: return "verb_2s";
    case RoleTag::Honesty: return "honesty";
    case RoleTag::Reflection: return "reflection";
    case RoleTag::Rag: return "rag";
    case RoleTag::Verifier: return "verifier";
  }
  throw ContractError("unknown RoleTag value");
}

RoleTag role_tag_from_string(std::string_view s) {
  for (RoleTag t :
       {RoleTag::Answer, RoleTag::PTrue, RoleTag::ConsistencySample,
        RoleTag::Verb1S, RoleTag::Verb2S, RoleTag::Honesty,
        RoleTag::Reflection, RoleTag::Rag, RoleTag::Verifier}) {
    if (to_string(t) == s) return t;
  }
  throw DataError("unknown role tag: " + std::string(s));
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Correct: return "correct";
    case Outcome::Incorrect: return "incorrect";
    case Outcome::Rejected: return "rejected";
  }
  throw ContractError("unknown Outcome value");
}

Outcome outcome_from_string(std::string_view s) {
  for (Outcome o : {Outcome::Correct, Outcome::Incorrect, Outcome::Rejected}) {
    if (to_string(o) == s) return o;
  }
  throw DataError("unknown outcome: " + std::string(s));
}

std::string_view to_string(Classification c) {
  switch (c) {
    case Classification::None: return "none";
    case Classification::Hallucination: return "hallucination";
    case Classification::Delusion: return "delusion";
  }
  throw ContractError("unknown Classification value");
}

Classification classification_from_string(std::string_view s) {
  for (Classification c : {Classification::None, Classification::Hallucination,
                           Classification::Delusion}) {
    if (to_string(c) == s) return c;
  }
  throw DataError("unknown classification: " + std::string(s));
}

const GenerationTrace* AuditRecord::find_trace(RoleTag tag) const {
  for (const auto& t : traces) {
    if (t.role_tag == tag) return &t;
  }
  return nullptr;
}

const GenerationTrace* AuditRecord::answer_trace() const {
  if (const auto* t = find_trace(RoleTag::Answer)) return t;
  return find_trace(RoleTag::Rag);
}

}  // namespace delaudit
