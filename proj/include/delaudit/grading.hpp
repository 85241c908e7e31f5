#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "delaudit/types.hpp"

namespace delaudit::grading {

struct NormalizedAnswer {
  std::string original;
  std::string canonical;
};

/// Canonical form: ASCII-lowercased, punctuation removed, standalone
/// articles ("a", "an", "the") dropped, whitespace collapsed to single
/// spaces. Deterministic; bytes >= 0x80 pass through untouched.
NormalizedAnswer normalize_answer(std::string_view text);

/// Shorthand for normalize_answer(text).canonical.
std::string canonical_form(std::string_view text);

/// Phrases that mark an answer as a refusal. Matching happens on canonical
/// forms, so lexicon entries may be written naturally ("I don't know").
class RefusalLexicon {
 public:
  static RefusalLexicon defaults();

  /// One phrase per line; '#' starts a comment; blank lines ignored.
  static RefusalLexicon from_file(const std::string& path);

  bool is_rejection(std::string_view text) const;
  const std::vector<std::string>& canonical_phrases() const {
    return phrases_;
  }

 private:
  std::vector<std::string> phrases_;  // canonical forms
};

inline bool is_rejection(std::string_view text) {
  return RefusalLexicon::defaults().is_rejection(text);
}

struct GradingOptions {
  bool strict_em = false;  // equality only, no containment
  const RefusalLexicon* lexicon = nullptr;  // nullptr = defaults
};

/// True when the canonical alias occurs as a contiguous whole-token run
/// inside the canonical answer (or equals it). An alias whose canonical
/// form is empty matches only by equality.
bool contains_alias(std::string_view canonical_answer,
                    std::string_view canonical_alias);

/// Rejected if the answer matches the refusal lexicon; else Correct if any
/// gold alias matches (containment by default, equality with strict_em);
/// else Incorrect. The rejection check runs first.
Outcome grade(std::string_view answer_text, const QAItem& item,
              const GradingOptions& opts = {});

/// Symmetric match used by the voting and reflection protocols: canonical
/// equality, or containment in either direction unless strict.
bool answers_match(std::string_view a, std::string_view b,
                   bool strict = false);

}  // namespace delaudit::grading
