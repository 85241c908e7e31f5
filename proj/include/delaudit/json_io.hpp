#pragma once

#include <json.hpp>

#include "delaudit/types.hpp"

// nlohmann ADL serializers for the record schema (version 1). Object keys
// serialize in sorted order and doubles use shortest round-trip formatting,
// so dump(parse(x)) == x holds for files produced by this toolkit.
namespace delaudit {

void to_json(nlohmann::json& j, const Message& m);
void from_json(const nlohmann::json& j, Message& m);

void to_json(nlohmann::json& j, const SamplingParams& p);
void from_json(const nlohmann::json& j, SamplingParams& p);

void to_json(nlohmann::json& j, const TokenLogprob& t);
void from_json(const nlohmann::json& j, TokenLogprob& t);

void to_json(nlohmann::json& j, const GenerationTrace& t);
void from_json(const nlohmann::json& j, GenerationTrace& t);

void to_json(nlohmann::json& j, const QAItem& item);
void from_json(const nlohmann::json& j, QAItem& item);

void to_json(nlohmann::json& j, const BeliefVector& b);
void from_json(const nlohmann::json& j, BeliefVector& b);

void to_json(nlohmann::json& j, const Verdict& v);
void from_json(const nlohmann::json& j, Verdict& v);

void to_json(nlohmann::json& j, const VoteOutcome& v);
void from_json(const nlohmann::json& j, VoteOutcome& v);

void to_json(nlohmann::json& j, const AuditRecord& r);
void from_json(const nlohmann::json& j, AuditRecord& r);

}  // namespace delaudit
