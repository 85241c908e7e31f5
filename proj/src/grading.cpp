#include "delaudit/grading.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "delaudit/errors.hpp"
#include "delaudit/util.hpp"

namespace delaudit::grading {

namespace {

bool is_article(std::string_view tok) {
  return tok == "a" || tok == "an" || tok == "the";
}

std::vector<std::string> tokens_of(std::string_view canonical) {
  return util::split_ws(canonical);
}

}  // namespace

NormalizedAnswer normalize_answer(std::string_view text) {
  std::string lowered;
  lowered.reserve(text.size());
  for (unsigned char c : text) {
    if (c < 0x80 && std::ispunct(c)) continue;
    lowered.push_back(
        c < 0x80 ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
  }
  std::string canonical;
  for (const auto& tok : util::split_ws(lowered)) {
    if (is_article(tok)) continue;
    if (!canonical.empty()) canonical.push_back(' ');
    canonical += tok;
  }
  return NormalizedAnswer{std::string(text), std::move(canonical)};
}

std::string canonical_form(std::string_view text) {
  return normalize_answer(text).canonical;
}

RefusalLexicon RefusalLexicon::defaults() {
  RefusalLexicon lex;
  for (const char* phrase :
       {"i don't know", "i do not know", "i cannot answer", "i can't answer",
        "not enough information", "i'm not sure of the answer"}) {
    lex.phrases_.push_back(canonical_form(phrase));
  }
  return lex;
}

RefusalLexicon RefusalLexicon::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open refusal lexicon: " + path);
  RefusalLexicon lex;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string canon = canonical_form(line);
    if (!canon.empty()) lex.phrases_.push_back(std::move(canon));
  }
  if (lex.phrases_.empty()) {
    throw DataError("refusal lexicon has no phrases: " + path);
  }
  return lex;
}

bool RefusalLexicon::is_rejection(std::string_view text) const {
  std::string canon = canonical_form(text);
  for (const auto& phrase : phrases_) {
    if (canon.find(phrase) != std::string::npos) return true;
  }
  return false;
}

bool contains_alias(std::string_view canonical_answer,
                    std::string_view canonical_alias) {
  if (canonical_answer == canonical_alias) return true;
  if (canonical_alias.empty()) return false;
  auto answer_toks = tokens_of(canonical_answer);
  auto alias_toks = tokens_of(canonical_alias);
  if (alias_toks.empty() || alias_toks.size() > answer_toks.size()) {
    return false;
  }
  for (std::size_t i = 0; i + alias_toks.size() <= answer_toks.size(); ++i) {
    bool all = true;
    for (std::size_t j = 0; j < alias_toks.size(); ++j) {
      if (answer_toks[i + j] != alias_toks[j]) {
        all = false;
        break;
      }
    }
    if (all) return true;
  }
  return false;
}

Outcome grade(std::string_view answer_text, const QAItem& item,
              const GradingOptions& opts) {
  static const RefusalLexicon default_lexicon = RefusalLexicon::defaults();
  const RefusalLexicon& lexicon =
      opts.lexicon != nullptr ? *opts.lexicon : default_lexicon;
  if (lexicon.is_rejection(answer_text)) return Outcome::Rejected;

  std::string canon_answer = canonical_form(answer_text);
  for (const auto& alias : item.gold_answers) {
    std::string canon_alias = canonical_form(alias);
    bool hit = opts.strict_em ? (canon_answer == canon_alias)
                              : contains_alias(canon_answer, canon_alias);
    if (hit) return Outcome::Correct;
  }
  return Outcome::Incorrect;
}

bool answers_match(std::string_view a, std::string_view b, bool strict) {
  std::string ca = canonical_form(a);
  std::string cb = canonical_form(b);
  if (ca == cb) return true;
  if (strict) return false;
  return contains_alias(ca, cb) || contains_alias(cb, ca);
}

}  // namespace delaudit::grading
