#include "delaudit/estimators.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>

#include "delaudit/errors.hpp"
#include "delaudit/util.hpp"

namespace delaudit::estimators {

double raw_logits_belief(const GenerationTrace& trace) {
  if (trace.token_logprobs.empty()) {
    throw DataError("raw_logits: trace for item " + trace.item_id +
                    " has no token logprobs");
  }
  double sum = 0.0;
  for (const auto& tl : trace.token_logprobs) sum += tl.logprob;
  return std::exp(sum / static_cast<double>(trace.token_logprobs.size()));
}

AgreementResult agreement_belief(const std::vector<std::string>& answers) {
  if (answers.empty()) {
    throw ContractError("agreement: answer list must be non-empty");
  }
  std::map<std::string, int> counts;
  for (const auto& a : answers) ++counts[a];
  // std::map iterates keys in lexicographic order, so the first maximal
  // entry is the tie-break winner.
  const std::string* modal = nullptr;
  int best = 0;
  for (const auto& [answer, count] : counts) {
    if (count > best) {
      best = count;
      modal = &answer;
    }
  }
  return AgreementResult{static_cast<double>(best) /
                             static_cast<double>(answers.size()),
                         *modal};
}

namespace {

enum class Variant { None, True, False };

Variant classify_token(std::string_view token) {
  std::string s = util::to_lower(util::trim(token));
  if (s.empty()) return Variant::None;
  auto matches = [&](std::string_view word) {
    return util::istarts_with(s, word) ||
           (s.size() < word.size() && util::istarts_with(word, s));
  };
  if (matches("true")) return Variant::True;
  if (matches("false")) return Variant::False;
  return Variant::None;
}

}  // namespace

std::optional<PTruePair> p_true_from_trace(const GenerationTrace& trace) {
  std::optional<double> best_true;
  std::optional<double> best_false;
  if (!trace.token_logprobs.empty()) {
    const TokenLogprob& first = trace.token_logprobs.front();
    std::vector<std::pair<std::string, double>> candidates =
        first.top_alternatives;
    candidates.emplace_back(first.token, first.logprob);
    for (const auto& [tok, lp] : candidates) {
      switch (classify_token(tok)) {
        case Variant::True:
          if (!best_true || lp > *best_true) best_true = lp;
          break;
        case Variant::False:
          if (!best_false || lp > *best_false) best_false = lp;
          break;
        case Variant::None: break;
      }
    }
  }
  if (best_true && best_false) {
    double pt = std::exp(*best_true);
    double pf = std::exp(*best_false);
    return PTruePair{pt / (pt + pf), pf / (pt + pf)};
  }
  // Fallback on the generated text when the alternatives miss a variant.
  switch (classify_token(util::trim(trace.output_text))) {
    case Variant::True: return PTruePair{1.0, 0.0};
    case Variant::False: return PTruePair{0.0, 1.0};
    case Variant::None: return std::nullopt;
  }
  return std::nullopt;
}

namespace {

struct NumberHit {
  double value = 0.0;
  std::size_t begin = 0;
  std::size_t end = 0;  // one past the last digit
};

std::vector<NumberHit> find_numbers(std::string_view text) {
  std::vector<NumberHit> hits;
  std::size_t i = 0;
  while (i < text.size()) {
    if (std::isdigit(static_cast<unsigned char>(text[i]))) {
      std::size_t start = i;
      while (i < text.size() &&
             std::isdigit(static_cast<unsigned char>(text[i]))) {
        ++i;
      }
      if (i < text.size() && text[i] == '.' && i + 1 < text.size() &&
          std::isdigit(static_cast<unsigned char>(text[i + 1]))) {
        ++i;
        while (i < text.size() &&
               std::isdigit(static_cast<unsigned char>(text[i]))) {
          ++i;
        }
      }
      hits.push_back(
          NumberHit{std::stod(std::string(text.substr(start, i - start))),
                    start, i});
    } else {
      ++i;
    }
  }
  return hits;
}

}  // namespace

std::optional<double> parse_confidence(std::string_view text) {
  auto numbers = find_numbers(text);
  if (numbers.empty()) return std::nullopt;

  auto clamp01 = [](double v) { return std::clamp(v, 0.0, 1.0); };

  // Percent rule: last number immediately followed by '%' (whitespace
  // between digits and sign allowed).
  for (auto it = numbers.rbegin(); it != numbers.rend(); ++it) {
    std::size_t p = it->end;
    while (p < text.size() &&
           std::isspace(static_cast<unsigned char>(text[p]))) {
      ++p;
    }
    if (p < text.size() && text[p] == '%') {
      return clamp01(it->value / 100.0);
    }
  }

  // Keyword rule: last number in [0,100] preceded by a confidence keyword.
  std::string lowered = util::to_lower(text);
  std::size_t last_keyword_end = std::string::npos;
  for (const char* kw : {"confidence", "confident", "certainty"}) {
    std::size_t pos = lowered.rfind(kw);
    if (pos != std::string::npos) {
      std::size_t end = pos + std::string_view(kw).size();
      if (last_keyword_end == std::string::npos || end > last_keyword_end) {
        last_keyword_end = end;
      }
    }
  }
  if (last_keyword_end == std::string::npos) return std::nullopt;
  for (auto it = numbers.rbegin(); it != numbers.rend(); ++it) {
    if (it->begin >= last_keyword_end && it->value >= 0.0 &&
        it->value <= 100.0) {
      return clamp01(it->value / 100.0);
    }
  }
  return std::nullopt;
}

namespace {

SamplingParams greedy_params() {
  SamplingParams p;
  p.temperature = 0.0;
  p.top_p = 1.0;
  p.max_tokens = 128;
  return p;
}

}  // namespace

client::ChatRequest build_answer_request(const prompts::PromptLibrary& lib,
                                         const QAItem& item) {
  client::ChatRequest req;
  req.item_id = item.id;
  req.role_tag = RoleTag::Answer;
  req.messages =
      lib.get(prompts::TemplateId::Logits).render({{"question", item.question}});
  req.sampling = greedy_params();
  req.want_logprobs = true;
  return req;
}

client::ChatRequest build_p_true_request(const prompts::PromptLibrary& lib,
                                         const QAItem& item,
                                         const std::string& answer,
                                         int top_logprobs_k) {
  client::ChatRequest req;
  req.item_id = item.id;
  req.role_tag = RoleTag::PTrue;
  req.messages = lib.get(prompts::TemplateId::PTrue)
                     .render({{"question", item.question}, {"answer", answer}});
  req.sampling = greedy_params();
  req.sampling.max_tokens = 8;
  req.want_logprobs = true;
  req.top_logprobs_k = top_logprobs_k;
  return req;
}

client::ChatRequest build_verb_1s_request(const prompts::PromptLibrary& lib,
                                          const QAItem& item) {
  client::ChatRequest req;
  req.item_id = item.id;
  req.role_tag = RoleTag::Verb1S;
  req.messages = lib.get(prompts::TemplateId::Verb1S)
                     .render({{"question", item.question}});
  req.sampling = greedy_params();
  return req;
}

client::ChatRequest build_verb_2s_request(const prompts::PromptLibrary& lib,
                                          const QAItem& item,
                                          const std::string& previous_answer) {
  client::ChatRequest req;
  req.item_id = item.id;
  req.role_tag = RoleTag::Verb2S;
  req.messages =
      lib.get(prompts::TemplateId::Verb2S)
          .render({{"question", item.question},
                   {"previous_answer", previous_answer}});
  req.sampling = greedy_params();
  return req;
}

client::ChatRequest build_consistency_request(
    const prompts::PromptLibrary& lib, const QAItem& item, int n,
    std::optional<std::uint64_t> seed) {
  if (n < 2) throw ContractError("consistency sampling requires n >= 2");
  client::ChatRequest req;
  req.item_id = item.id;
  req.role_tag = RoleTag::ConsistencySample;
  req.messages = lib.get(prompts::TemplateId::Consistency)
                     .render({{"question", item.question}});
  req.sampling.temperature = 0.7;
  req.sampling.top_p = 0.95;
  req.sampling.top_k = 40;
  req.sampling.max_tokens = 128;
  req.sampling.n = n;
  req.sampling.seed = seed;
  return req;
}

std::vector<GenerationTrace> consistency_samples(
    client::ChatClient& chat, const prompts::PromptLibrary& lib,
    const QAItem& item, int n, std::optional<std::uint64_t> seed) {
  return chat.complete_many(build_consistency_request(lib, item, n, seed));
}

}  // namespace delaudit::estimators
