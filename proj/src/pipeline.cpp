#include "delaudit/pipeline.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <map>

#include <json.hpp>

#include "delaudit/dataset.hpp"
#include "delaudit/errors.hpp"
#include "delaudit/estimators.hpp"
#include "delaudit/grading.hpp"
#include "delaudit/json_io.hpp"
#include "delaudit/records.hpp"
#include "delaudit/util.hpp"

namespace delaudit::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

void RunConfig::validate() const {
  endpoint.validate();
  if (methods.empty()) throw ConfigError("at least one method is required");
  if (std::count(methods.begin(), methods.end(), Method::Agreement) > 0 &&
      consistency_n < 2) {
    throw ConfigError("agreement requires consistency_n >= 2");
  }
  if (ensemble_methods.has_value()) {
    if (ensemble_methods->empty()) {
      throw ConfigError("ensemble method list is empty");
    }
    for (Method m : *ensemble_methods) {
      if (std::count(methods.begin(), methods.end(), m) == 0) {
        throw ConfigError("ensemble method " + std::string(to_string(m)) +
                          " is not among the scored methods");
      }
    }
  }
  if (!classify_with.empty() && classify_with != kEnsembleId) {
    Method m = method_from_string(classify_with);  // throws on unknown
    if (std::count(methods.begin(), methods.end(), m) == 0) {
      throw ConfigError("classify_with method " + classify_with +
                        " is not among the scored methods");
    }
  }
  if (classify_with == kEnsembleId && !ensemble_methods.has_value()) {
    throw ConfigError("classify_with=ensemble requires ensemble methods");
  }
  if (output_dir.empty()) throw ConfigError("output_dir is required");
}

std::string RunConfig::effective_classify_with() const {
  if (!classify_with.empty()) return classify_with;
  if (ensemble_methods.has_value()) return std::string(kEnsembleId);
  return std::string(to_string(methods.front()));
}

namespace {

struct RunContext {
  prompts::PromptLibrary lib;
  grading::RefusalLexicon lexicon;
  grading::GradingOptions grading_opts;
};

RunContext make_context(const RunConfig& cfg) {
  std::string share = cfg.share_dir.empty()
                          ? prompts::PromptLibrary::default_share_dir()
                          : cfg.share_dir;
  RunContext ctx{prompts::PromptLibrary::load(share),
                 cfg.refusal_lexicon_path.empty()
                     ? grading::RefusalLexicon::defaults()
                     : grading::RefusalLexicon::from_file(
                           cfg.refusal_lexicon_path),
                 {}};
  ctx.grading_opts.strict_em = cfg.strict_em;
  ctx.grading_opts.lexicon = &ctx.lexicon;
  return ctx;
}

bool wants(const RunConfig& cfg, Method m) {
  return std::count(cfg.methods.begin(), cfg.methods.end(), m) > 0;
}

std::string dataset_tag_for(const RunConfig& cfg,
                            const std::vector<QAItem>& items) {
  for (const auto& item : items) {
    if (!item.source.empty()) return item.source;
  }
  return fs::path(cfg.dataset_path).stem().string();
}

std::string run_id_for(const RunConfig& cfg, const std::string& dataset_tag) {
  return dataset_tag + "-" + cfg.endpoint.model_name + "-s" +
         std::to_string(cfg.seed);
}

std::uint64_t item_seed(const RunConfig& cfg, const std::string& item_id) {
  return cfg.seed ^ util::fnv1a64(item_id);
}

void grade_records(std::vector<AuditRecord>& records,
                   const grading::GradingOptions& opts) {
  for (auto& r : records) {
    const GenerationTrace* answer = r.answer_trace();
    if (answer == nullptr) {
      throw DataError("record " + r.item.id + " has no answer trace");
    }
    r.verdict.item_id = r.item.id;
    r.verdict.outcome = grading::grade(answer->output_text, r.item, opts);
    r.verdict.classification = Classification::None;
    r.verdict.belief_used = std::nullopt;
    r.verdict.threshold_used = std::nullopt;
  }
}

/// Recomputes every requested belief score from the stored traces.
void score_records(std::vector<AuditRecord>& records, const RunConfig& cfg,
                   std::vector<std::string>& warnings) {
  for (auto& r : records) {
    r.belief = BeliefVector{};
    r.belief.item_id = r.item.id;
    if (r.verdict.outcome == Outcome::Rejected) continue;

    if (wants(cfg, Method::RawLogits)) {
      const GenerationTrace* answer = r.answer_trace();
      if (answer != nullptr && !answer->token_logprobs.empty()) {
        r.belief.raw[Method::RawLogits] =
            estimators::raw_logits_belief(*answer);
      } else {
        r.belief.parse_failed.insert(Method::RawLogits);
      }
    }
    if (wants(cfg, Method::Agreement)) {
      std::vector<std::string> answers;
      for (const auto& t : r.traces) {
        if (t.role_tag == RoleTag::ConsistencySample) {
          answers.push_back(grading::canonical_form(t.output_text));
        }
      }
      if (answers.size() >= 2) {
        r.belief.raw[Method::Agreement] =
            estimators::agreement_belief(answers).belief;
      } else {
        r.belief.parse_failed.insert(Method::Agreement);
      }
    }
    if (wants(cfg, Method::PTrue)) {
      const GenerationTrace* t = r.find_trace(RoleTag::PTrue);
      std::optional<estimators::PTruePair> pair;
      if (t != nullptr) pair = estimators::p_true_from_trace(*t);
      if (pair.has_value()) {
        r.belief.raw[Method::PTrue] = pair->p_true;
      } else {
        r.belief.parse_failed.insert(Method::PTrue);
      }
    }
    for (auto [method, tag] :
         {std::pair{Method::Verb1S, RoleTag::Verb1S},
          std::pair{Method::Verb2S, RoleTag::Verb2S}}) {
      if (!wants(cfg, method)) continue;
      const GenerationTrace* t = r.find_trace(tag);
      std::optional<double> conf;
      if (t != nullptr) conf = estimators::parse_confidence(t->output_text);
      if (conf.has_value()) {
        r.belief.raw[method] = *conf;
      } else {
        r.belief.parse_failed.insert(method);
      }
    }
  }

  calibrate::apply_rank_normalization(records, cfg.methods);
  if (cfg.ensemble_methods.has_value()) {
    calibrate::apply_ensemble(
        records,
        calibrate::EnsembleOptions{*cfg.ensemble_methods, cfg.normalized});
  }
  (void)warnings;
}

report::OutcomeOverrides verb1s_overrides(
    const std::vector<AuditRecord>& records, const RunConfig& cfg,
    const grading::GradingOptions& opts) {
  report::OutcomeOverrides overrides;
  if (!cfg.verb1s_own_answer || !wants(cfg, Method::Verb1S)) return overrides;
  auto& per_item = overrides[std::string(to_string(Method::Verb1S))];
  for (const auto& r : records) {
    const GenerationTrace* t = r.find_trace(RoleTag::Verb1S);
    if (t != nullptr) {
      per_item[r.item.id] = grading::grade(t->output_text, r.item, opts);
    }
  }
  return overrides;
}

AuditOutput finish_run(std::vector<AuditRecord>& records, const RunConfig& cfg,
                       const RunContext& ctx,
                       std::vector<std::string> warnings) {
  score_records(records, cfg, warnings);

  AuditOutput out;
  std::vector<std::string> wanted_ids;
  for (Method m : cfg.methods) wanted_ids.emplace_back(to_string(m));
  if (cfg.ensemble_methods.has_value()) {
    wanted_ids.emplace_back(kEnsembleId);
  }
  for (const auto& id : wanted_ids) {
    try {
      out.threshold_specs.push_back(
          calibrate::belief_threshold(records, id, cfg.normalized));
    } catch (const DataError& e) {
      warnings.push_back(e.what());
    }
  }

  std::string main_id = cfg.effective_classify_with();
  const calibrate::ThresholdSpec* main_spec = nullptr;
  for (const auto& spec : out.threshold_specs) {
    if (spec.method_or_ensemble == main_id) main_spec = &spec;
  }
  if (main_spec != nullptr) {
    calibrate::classify(records, *main_spec);
  } else {
    warnings.push_back("classification skipped: no threshold for " + main_id);
  }

  std::string tag;
  for (const auto& r : records) {
    if (!r.item.source.empty()) {
      tag = r.item.source;
      break;
    }
  }
  out.run_report = report::aggregate(
      records, out.threshold_specs, run_id_for(cfg, tag),
      cfg.endpoint.model_name, verb1s_overrides(records, cfg,
                                                ctx.grading_opts));
  out.run_report.warnings = std::move(warnings);
  out.records = std::move(records);
  return out;
}

}  // namespace

AuditOutput run_audit(const RunConfig& cfg) {
  cfg.validate();
  RunContext ctx = make_context(cfg);
  std::vector<QAItem> items = core::load_dataset(cfg.dataset_path);
  if (items.empty()) throw DataError("dataset is empty: " + cfg.dataset_path);
  std::string tag = dataset_tag_for(cfg, items);
  for (auto& item : items) {
    if (item.source.empty()) item.source = tag;
  }

  std::vector<std::string> warnings;
  client::ChatClient chat = client::ChatClient::for_endpoint(cfg.endpoint);

  // Answer phase.
  std::vector<client::ChatRequest> answer_requests;
  for (const auto& item : items) {
    if (cfg.rag) {
      if (!item.passages.has_value() || item.passages->empty()) {
        throw ContractError("rag: item " + item.id + " has no passages");
      }
      if (static_cast<int>(item.passages->size()) !=
          protocols::kExpectedRagPassages) {
        warnings.push_back("item " + item.id + " has " +
                           std::to_string(item.passages->size()) +
                           " passages (expected " +
                           std::to_string(protocols::kExpectedRagPassages) +
                           ")");
      }
      answer_requests.push_back(protocols::build_rag_request(ctx.lib, item));
    } else {
      answer_requests.push_back(
          estimators::build_answer_request(ctx.lib, item));
    }
  }
  auto answer_slots = chat.complete_batch(answer_requests, cfg.parallelism);

  std::vector<AuditRecord> records;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (!answer_slots[i].ok()) {
      warnings.push_back("item " + items[i].id +
                         " skipped: " + answer_slots[i].error);
      continue;
    }
    AuditRecord r;
    r.item = items[i];
    r.traces.push_back(answer_slots[i].trace());
    r.belief.item_id = r.item.id;
    records.push_back(std::move(r));
  }
  if (records.empty()) {
    throw TransportError("no item could be answered by " +
                         cfg.endpoint.base_url);
  }
  grade_records(records, ctx.grading_opts);

  // Estimator phases run over answered, non-rejected records only.
  std::vector<std::size_t> scored_idx;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].verdict.outcome != Outcome::Rejected) scored_idx.push_back(i);
  }
  auto run_phase = [&](Method method,
                       const std::function<client::ChatRequest(
                           const AuditRecord&)>& build) {
    if (!wants(cfg, method)) return;
    std::vector<client::ChatRequest> requests;
    requests.reserve(scored_idx.size());
    for (std::size_t i : scored_idx) requests.push_back(build(records[i]));
    auto slots = chat.complete_batch(requests, cfg.parallelism);
    for (std::size_t k = 0; k < slots.size(); ++k) {
      AuditRecord& r = records[scored_idx[k]];
      if (!slots[k].ok()) {
        warnings.push_back(std::string(to_string(method)) + " failed for " +
                           r.item.id + ": " + slots[k].error);
        continue;
      }
      for (auto& t : slots[k].traces) r.traces.push_back(std::move(t));
    }
  };

  run_phase(Method::Agreement, [&](const AuditRecord& r) {
    auto req = estimators::build_consistency_request(
        ctx.lib, r.item, cfg.consistency_n, item_seed(cfg, r.item.id));
    if (cfg.rag) {
      // Belief in the retrieval-grounded answer: sample the RAG prompt.
      auto rag_req = protocols::build_rag_request(ctx.lib, r.item);
      req.messages = rag_req.messages;
    }
    return req;
  });
  run_phase(Method::PTrue, [&](const AuditRecord& r) {
    return estimators::build_p_true_request(
        ctx.lib, r.item, r.answer_trace()->output_text, cfg.top_logprobs_k);
  });
  run_phase(Method::Verb1S, [&](const AuditRecord& r) {
    return estimators::build_verb_1s_request(ctx.lib, r.item);
  });
  run_phase(Method::Verb2S, [&](const AuditRecord& r) {
    return estimators::build_verb_2s_request(
        ctx.lib, r.item, r.answer_trace()->output_text);
  });

  return finish_run(records, cfg, ctx, std::move(warnings));
}

AuditOutput rescore(const RunConfig& cfg, std::vector<AuditRecord> records) {
  cfg.validate();
  RunContext ctx = make_context(cfg);
  if (records.empty()) throw DataError("no records to rescore");
  grade_records(records, ctx.grading_opts);
  return finish_run(records, cfg, ctx, {});
}

void write_outputs(const RunConfig& cfg, const AuditOutput& out) {
  fs::create_directories(cfg.output_dir);
  core::save_records(out.records, cfg.output_dir + "/records.jsonl");
  report::emit(out.run_report, cfg.output_dir,
               {report::Format::Json, report::Format::Csv,
                report::Format::Markdown});
}

AuditOutput load_baseline(const RunConfig& cfg, const std::string& run_dir) {
  std::string path = run_dir + "/records.jsonl";
  if (!fs::exists(path)) {
    throw ConfigError("baseline run directory has no records.jsonl: " +
                      run_dir + " (run `delaudit audit` first)");
  }
  return rescore(cfg, core::load_records(path));
}

report::RunReport run_honesty(const RunConfig& cfg,
                              const AuditOutput& baseline,
                              const protocols::HonestyOptions& opts) {
  RunContext ctx = make_context(cfg);
  client::ChatClient chat = client::ChatClient::for_endpoint(cfg.endpoint);
  protocols::HonestyOptions effective = opts;
  if (effective.parallelism == 0) effective.parallelism = cfg.parallelism;
  protocols::HonestyRun run = protocols::honesty_battery(
      chat, ctx.lib, baseline.records, ctx.grading_opts, effective);

  json section = json::array();
  for (const auto& p : run.per_prompt) {
    json entry{{"prompt_tag", p.prompt_tag},
               {"n_delusion", p.n_delusion},
               {"n_hallucination", p.n_hallucination},
               {"refused_delusion", p.refused_delusion},
               {"refused_hallucination", p.refused_hallucination},
               {"n_asked", p.n_asked},
               {"n_correct_now", p.n_correct_now},
               {"n_incorrect_now", p.n_incorrect_now},
               {"n_rejected_now", p.n_rejected_now},
               {"n_skipped", p.n_skipped},
               {"error_rate_now", p.error_rate_now()}};
    auto d = p.delusion_refuse_rate();
    auto h = p.hallucination_refuse_rate();
    entry["delusion_refuse_rate"] = d.has_value() ? json(*d) : json(nullptr);
    entry["hallucination_refuse_rate"] =
        h.has_value() ? json(*h) : json(nullptr);
    section.push_back(std::move(entry));
  }

  report::RunReport out = baseline.run_report;
  out.protocol_sections["honesty"] = std::move(section);

  fs::create_directories(cfg.output_dir);
  core::save_traces(run.traces, cfg.output_dir + "/honesty_traces.jsonl");
  report::emit(out, cfg.output_dir,
               {report::Format::Json, report::Format::Markdown});
  return out;
}

report::RunReport run_reflect(const RunConfig& cfg,
                              const AuditOutput& baseline) {
  RunContext ctx = make_context(cfg);
  client::ChatClient chat = client::ChatClient::for_endpoint(cfg.endpoint);
  protocols::ReflectionRun run = protocols::reflect_all(
      chat, ctx.lib, baseline.records, ctx.grading_opts, cfg.parallelism);

  // Outcome distribution per baseline class.
  std::map<std::string, std::map<std::string, int>> by_class;
  std::map<std::string, Classification> base_class;
  std::map<std::string, Outcome> base_outcome;
  for (const auto& r : baseline.records) {
    base_class[r.item.id] = r.verdict.classification;
    base_outcome[r.item.id] = r.verdict.outcome;
  }
  for (const auto& o : run.outcomes) {
    std::string cls =
        base_outcome[o.item_id] == Outcome::Correct
            ? "correct"
            : std::string(to_string(base_class[o.item_id]));
    ++by_class[cls][std::string(to_string(o.outcome))];
  }
  json section = json::object();
  for (const auto& [cls, counts] : by_class) {
    json jc = json::object();
    int total = 0;
    for (const auto& [k, v] : counts) total += v;
    for (const auto& [k, v] : counts) jc[k] = v;
    jc["total"] = total;
    if (total > 0 && counts.count("insist") != 0) {
      jc["insist_rate"] = static_cast<double>(counts.at("insist")) / total;
    }
    section[cls] = std::move(jc);
  }

  report::RunReport out = baseline.run_report;
  out.protocol_sections["reflection"] = std::move(section);

  fs::create_directories(cfg.output_dir);
  core::save_traces(run.traces, cfg.output_dir + "/reflect_traces.jsonl");
  std::string outcomes_bytes;
  for (const auto& o : run.outcomes) {
    outcomes_bytes +=
        json{{"item_id", o.item_id},
             {"outcome", std::string(to_string(o.outcome))},
             {"reflection_output", o.reflection_output}}
            .dump();
    outcomes_bytes.push_back('\n');
  }
  util::write_file(cfg.output_dir + "/reflect_outcomes.jsonl", outcomes_bytes);
  report::emit(out, cfg.output_dir,
               {report::Format::Json, report::Format::Markdown});
  return out;
}

report::RunReport run_debate(const RunConfig& cfg, AuditOutput baseline,
                             const protocols::VoteConfig& vote_config) {
  vote_config.validate();
  RunContext ctx = make_context(cfg);

  std::vector<client::ChatClient> verifiers;
  verifiers.reserve(vote_config.verifier_endpoints.size());
  for (const auto& ep : vote_config.verifier_endpoints) {
    verifiers.push_back(client::ChatClient::for_endpoint(ep));
  }

  // Rejections are not voted.
  std::vector<std::size_t> voted_idx;
  for (std::size_t i = 0; i < baseline.records.size(); ++i) {
    if (baseline.records[i].verdict.outcome != Outcome::Rejected) {
      voted_idx.push_back(i);
    }
  }

  // One batch per verifier endpoint, then per-item tallies.
  std::vector<std::vector<client::BatchSlot>> verifier_slots;
  for (std::size_t v = 0; v < verifiers.size(); ++v) {
    std::vector<client::ChatRequest> requests;
    requests.reserve(voted_idx.size());
    for (std::size_t i : voted_idx) {
      auto req =
          estimators::build_answer_request(ctx.lib, baseline.records[i].item);
      req.role_tag = RoleTag::Verifier;
      req.want_logprobs = false;
      requests.push_back(std::move(req));
    }
    verifier_slots.push_back(verifiers[v].complete_batch(requests));
  }

  int discarded = 0;
  for (std::size_t k = 0; k < voted_idx.size(); ++k) {
    AuditRecord& r = baseline.records[voted_idx[k]];
    const std::string& target = r.answer_trace()->output_text;
    VoteOutcome vote;
    vote.item_id = r.item.id;
    vote.threshold = vote_config.threshold;
    for (std::size_t v = 0; v < verifiers.size(); ++v) {
      VoteOutcome::VerifierResult res;
      res.model_name = vote_config.verifier_endpoints[v].model_name;
      const client::BatchSlot& slot = verifier_slots[v][k];
      if (!slot.ok()) {
        res.failed = true;
      } else {
        res.answer = slot.trace().output_text;
        res.matched = grading::answers_match(res.answer, target,
                                             vote_config.strict_match);
      }
      vote.verifiers.push_back(std::move(res));
    }
    vote.kept = protocols::vote_keep(vote.match_count(), vote.threshold);
    if (!vote.kept) {
      r.verdict.outcome = Outcome::Rejected;
      r.verdict.classification = Classification::None;
      r.verdict.belief_used = std::nullopt;
      r.verdict.threshold_used = std::nullopt;
      ++discarded;
    }
    r.vote = std::move(vote);
  }

  // Post-mitigation metrics keep the baseline thresholds; discarding can
  // only remove errors, never create delusions.
  report::RunReport post = report::aggregate(
      baseline.records, baseline.threshold_specs,
      baseline.run_report.run_id + "-voted", cfg.endpoint.model_name,
      verb1s_overrides(baseline.records, cfg, ctx.grading_opts));
  auto deltas = report::compare_runs(baseline.run_report, post);
  post.protocol_sections["voting"] =
      json{{"threshold", vote_config.threshold},
           {"n_verifiers", vote_config.verifier_endpoints.size()},
           {"n_voted", voted_idx.size()},
           {"n_discarded", discarded},
           {"delta_vs_baseline", report::deltas_to_json(deltas)}};

  fs::create_directories(cfg.output_dir);
  core::save_records(baseline.records, cfg.output_dir + "/records.jsonl");
  util::write_file(cfg.output_dir + "/compare.md",
                   report::delta_table_markdown(deltas));
  report::emit(post, cfg.output_dir,
               {report::Format::Json, report::Format::Csv,
                report::Format::Markdown});
  return post;
}

}  // namespace delaudit::pipeline
