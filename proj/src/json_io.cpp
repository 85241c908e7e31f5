#include "delaudit/json_io.hpp"

#include "delaudit/errors.hpp"

namespace delaudit {

namespace {

using nlohmann::json;

json opt_to_json(const std::optional<double>& v) {
  if (v.has_value()) return *v;
  return nullptr;
}

std::optional<double> opt_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

void to_json(json& j, const Message& m) {
  j = json{{"role", m.role}, {"text", m.text}};
}

void from_json(const json& j, Message& m) {
  j.at("role").get_to(m.role);
  j.at("text").get_to(m.text);
}

void to_json(json& j, const SamplingParams& p) {
  j = json{{"temperature", p.temperature},
           {"top_p", p.top_p},
           {"top_k", p.top_k},
           {"max_tokens", p.max_tokens},
           {"n", p.n},
           {"seed", p.seed.has_value() ? json(*p.seed) : json(nullptr)}};
}

void from_json(const json& j, SamplingParams& p) {
  j.at("temperature").get_to(p.temperature);
  j.at("top_p").get_to(p.top_p);
  j.at("top_k").get_to(p.top_k);
  j.at("max_tokens").get_to(p.max_tokens);
  j.at("n").get_to(p.n);
  const auto& s = j.at("seed");
  p.seed = s.is_null() ? std::nullopt
                       : std::optional<std::uint64_t>(s.get<std::uint64_t>());
}

void to_json(json& j, const TokenLogprob& t) {
  json alts = json::array();
  for (const auto& [tok, lp] : t.top_alternatives) {
    alts.push_back(json::array({tok, lp}));
  }
  j = json{{"token", t.token}, {"logprob", t.logprob}, {"top", alts}};
}

void from_json(const json& j, TokenLogprob& t) {
  j.at("token").get_to(t.token);
  j.at("logprob").get_to(t.logprob);
  t.top_alternatives.clear();
  for (const auto& alt : j.at("top")) {
    t.top_alternatives.emplace_back(alt.at(0).get<std::string>(),
                                    alt.at(1).get<double>());
  }
}

void to_json(json& j, const GenerationTrace& t) {
  j = json{{"item_id", t.item_id},
           {"role_tag", std::string(to_string(t.role_tag))},
           {"prompt_messages", t.prompt_messages},
           {"output_text", t.output_text},
           {"token_logprobs", t.token_logprobs},
           {"sampling", t.sampling},
           {"created_at", t.created_at},
           {"retry_count", t.retry_count},
           {"top_k_omitted", t.top_k_omitted}};
}

void from_json(const json& j, GenerationTrace& t) {
  j.at("item_id").get_to(t.item_id);
  t.role_tag = role_tag_from_string(j.at("role_tag").get<std::string>());
  j.at("prompt_messages").get_to(t.prompt_messages);
  j.at("output_text").get_to(t.output_text);
  j.at("token_logprobs").get_to(t.token_logprobs);
  j.at("sampling").get_to(t.sampling);
  j.at("created_at").get_to(t.created_at);
  j.at("retry_count").get_to(t.retry_count);
  j.at("top_k_omitted").get_to(t.top_k_omitted);
}

void to_json(json& j, const QAItem& item) {
  j = json{{"id", item.id},
           {"question", item.question},
           {"gold_answers", item.gold_answers},
           {"passages", item.passages.has_value() ? json(*item.passages)
                                                  : json(nullptr)},
           {"source", item.source}};
}

void from_json(const json& j, QAItem& item) {
  j.at("id").get_to(item.id);
  j.at("question").get_to(item.question);
  j.at("gold_answers").get_to(item.gold_answers);
  const auto& p = j.at("passages");
  item.passages = p.is_null() ? std::nullopt
                              : std::optional<std::vector<std::string>>(
                                    p.get<std::vector<std::string>>());
  j.at("source").get_to(item.source);
}

void to_json(json& j, const BeliefVector& b) {
  json raw = json::object();
  json normalized = json::object();
  for (const auto& [m, v] : b.raw) raw[std::string(to_string(m))] = v;
  for (Method m : b.parse_failed) raw[std::string(to_string(m))] = nullptr;
  for (const auto& [m, v] : b.normalized) {
    normalized[std::string(to_string(m))] = v;
  }
  json failed = json::array();
  for (Method m : b.parse_failed) failed.push_back(std::string(to_string(m)));
  j = json{{"item_id", b.item_id},
           {"raw", raw},
           {"normalized", normalized},
           {"ensemble", opt_to_json(b.ensemble)},
           {"ensemble_partial", b.ensemble_partial},
           {"parse_failed", failed}};
}

void from_json(const json& j, BeliefVector& b) {
  j.at("item_id").get_to(b.item_id);
  b.raw.clear();
  for (const auto& [key, val] : j.at("raw").items()) {
    if (!val.is_null()) {
      double v = val.get<double>();
      if (v < 0.0 || v > 1.0) {
        throw DataError("belief score out of [0,1] for item " + b.item_id);
      }
      b.raw[method_from_string(key)] = v;
    }
  }
  b.normalized.clear();
  for (const auto& [key, val] : j.at("normalized").items()) {
    b.normalized[method_from_string(key)] = val.get<double>();
  }
  b.ensemble = opt_from_json(j.at("ensemble"));
  j.at("ensemble_partial").get_to(b.ensemble_partial);
  b.parse_failed.clear();
  for (const auto& name : j.at("parse_failed")) {
    b.parse_failed.insert(method_from_string(name.get<std::string>()));
  }
}

void to_json(json& j, const Verdict& v) {
  j = json{{"item_id", v.item_id},
           {"outcome", std::string(to_string(v.outcome))},
           {"classification", std::string(to_string(v.classification))},
           {"belief_used", opt_to_json(v.belief_used)},
           {"threshold_used", opt_to_json(v.threshold_used)}};
}

void from_json(const json& j, Verdict& v) {
  j.at("item_id").get_to(v.item_id);
  v.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  v.classification =
      classification_from_string(j.at("classification").get<std::string>());
  v.belief_used = opt_from_json(j.at("belief_used"));
  v.threshold_used = opt_from_json(j.at("threshold_used"));
}

void to_json(json& j, const VoteOutcome& v) {
  json verifiers = json::array();
  for (const auto& r : v.verifiers) {
    verifiers.push_back(json{{"model_name", r.model_name},
                             {"answer", r.answer},
                             {"matched", r.matched},
                             {"failed", r.failed}});
  }
  j = json{{"item_id", v.item_id},
           {"verifiers", verifiers},
           {"threshold", v.threshold},
           {"kept", v.kept}};
}

void from_json(const json& j, VoteOutcome& v) {
  j.at("item_id").get_to(v.item_id);
  v.verifiers.clear();
  for (const auto& r : j.at("verifiers")) {
    VoteOutcome::VerifierResult res;
    r.at("model_name").get_to(res.model_name);
    r.at("answer").get_to(res.answer);
    r.at("matched").get_to(res.matched);
    r.at("failed").get_to(res.failed);
    v.verifiers.push_back(std::move(res));
  }
  j.at("threshold").get_to(v.threshold);
  j.at("kept").get_to(v.kept);
}

void to_json(json& j, const AuditRecord& r) {
  j = json{{"item", r.item},
           {"traces", r.traces},
           {"belief", r.belief},
           {"verdict", r.verdict}};
  if (r.vote.has_value()) j["vote"] = *r.vote;
}

void from_json(const json& j, AuditRecord& r) {
  j.at("item").get_to(r.item);
  j.at("traces").get_to(r.traces);
  j.at("belief").get_to(r.belief);
  j.at("verdict").get_to(r.verdict);
  if (j.contains("vote") && !j.at("vote").is_null()) {
    r.vote = j.at("vote").get<VoteOutcome>();
  } else {
    r.vote = std::nullopt;
  }
}

}  // namespace delaudit
