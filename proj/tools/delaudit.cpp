// delaudit: audit chat-completion endpoints for delusions (high-belief
// wrong answers), run the mitigation protocols, and build the data-noise
// and refusal-SFT training sets.

#include <filesystem>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "delaudit/dataset.hpp"
#include "delaudit/dedup.hpp"
#include "delaudit/errors.hpp"
#include "delaudit/noise.hpp"
#include "delaudit/pipeline.hpp"
#include "delaudit/records.hpp"
#include "delaudit/util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace delaudit;

namespace {

struct CliState {
  pipeline::RunConfig run;
  std::string runs_root = "runs";
  std::string config_path;
  std::string baseline_dir;
  std::string resume_from;
  bool dry_run = false;

  // Voting.
  protocols::VoteConfig vote;
  std::vector<std::string> verifier_urls;  // url=model pairs

  // Methods as comma lists (CLI-facing).
  std::string methods_csv;
  std::string ensemble_csv;
  bool raw_scores = false;
};

std::vector<Method> parse_methods_csv(const std::string& csv) {
  std::vector<Method> out;
  std::size_t pos = 0;
  while (pos <= csv.size()) {
    std::size_t comma = csv.find(',', pos);
    std::string tok = util::trim(
        csv.substr(pos, comma == std::string::npos ? csv.size() - pos
                                                   : comma - pos));
    if (!tok.empty()) out.push_back(method_from_string(tok));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  if (out.empty()) throw ConfigError("empty method list: " + csv);
  return out;
}

client::EndpointConfig endpoint_from_json(const json& j,
                                          client::EndpointConfig base = {}) {
  client::EndpointConfig ep = std::move(base);
  if (j.contains("base_url")) j.at("base_url").get_to(ep.base_url);
  if (j.contains("api_key_env")) j.at("api_key_env").get_to(ep.api_key_env);
  if (j.contains("model_name")) j.at("model_name").get_to(ep.model_name);
  if (j.contains("request_timeout_s")) {
    j.at("request_timeout_s").get_to(ep.request_timeout_s);
  }
  if (j.contains("max_retries")) j.at("max_retries").get_to(ep.max_retries);
  if (j.contains("max_parallel")) j.at("max_parallel").get_to(ep.max_parallel);
  return ep;
}

void apply_config_file(CliState& state) {
  if (state.config_path.empty()) return;
  json cfg;
  try {
    cfg = json::parse(util::read_file(state.config_path));
  } catch (const json::exception& e) {
    throw ConfigError("config file " + state.config_path + ": " + e.what());
  }
  if (cfg.contains("endpoint")) {
    state.run.endpoint =
        endpoint_from_json(cfg.at("endpoint"), state.run.endpoint);
  }
  if (cfg.contains("dataset")) cfg.at("dataset").get_to(state.run.dataset_path);
  if (cfg.contains("methods")) {
    state.run.methods.clear();
    for (const auto& m : cfg.at("methods")) {
      state.run.methods.push_back(method_from_string(m.get<std::string>()));
    }
  }
  if (cfg.contains("ensemble") && !cfg.at("ensemble").is_null()) {
    std::vector<Method> ens;
    for (const auto& m : cfg.at("ensemble")) {
      ens.push_back(method_from_string(m.get<std::string>()));
    }
    state.run.ensemble_methods = std::move(ens);
  }
  if (cfg.contains("normalized")) cfg.at("normalized").get_to(state.run.normalized);
  if (cfg.contains("consistency_n")) {
    cfg.at("consistency_n").get_to(state.run.consistency_n);
  }
  if (cfg.contains("seed")) cfg.at("seed").get_to(state.run.seed);
  if (cfg.contains("top_logprobs_k")) {
    cfg.at("top_logprobs_k").get_to(state.run.top_logprobs_k);
  }
  if (cfg.contains("parallelism")) {
    cfg.at("parallelism").get_to(state.run.parallelism);
  }
  if (cfg.contains("verb1s_own_answer")) {
    cfg.at("verb1s_own_answer").get_to(state.run.verb1s_own_answer);
  }
  if (cfg.contains("strict_em")) cfg.at("strict_em").get_to(state.run.strict_em);
  if (cfg.contains("share_dir")) cfg.at("share_dir").get_to(state.run.share_dir);
  if (cfg.contains("refusal_lexicon")) {
    cfg.at("refusal_lexicon").get_to(state.run.refusal_lexicon_path);
  }
  if (cfg.contains("classify_with")) {
    cfg.at("classify_with").get_to(state.run.classify_with);
  }
  if (cfg.contains("runs_root")) cfg.at("runs_root").get_to(state.runs_root);
  if (cfg.contains("verifiers")) {
    for (const auto& v : cfg.at("verifiers")) {
      state.vote.verifier_endpoints.push_back(endpoint_from_json(v));
    }
  }
  if (cfg.contains("vote_threshold")) {
    cfg.at("vote_threshold").get_to(state.vote.threshold);
  }
  if (cfg.contains("strict_match")) {
    cfg.at("strict_match").get_to(state.vote.strict_match);
  }
}

json run_config_to_json(const pipeline::RunConfig& cfg) {
  json methods = json::array();
  for (Method m : cfg.methods) methods.push_back(std::string(to_string(m)));
  json ensemble = nullptr;
  if (cfg.ensemble_methods.has_value()) {
    ensemble = json::array();
    for (Method m : *cfg.ensemble_methods) {
      ensemble.push_back(std::string(to_string(m)));
    }
  }
  return json{
      {"endpoint", json{{"base_url", cfg.endpoint.base_url},
                        {"api_key_env", cfg.endpoint.api_key_env},
                        {"model_name", cfg.endpoint.model_name},
                        {"request_timeout_s", cfg.endpoint.request_timeout_s},
                        {"max_retries", cfg.endpoint.max_retries},
                        {"max_parallel", cfg.endpoint.max_parallel}}},
      {"dataset", cfg.dataset_path},
      {"methods", methods},
      {"ensemble", ensemble},
      {"normalized", cfg.normalized},
      {"consistency_n", cfg.consistency_n},
      {"seed", cfg.seed},
      {"top_logprobs_k", cfg.top_logprobs_k},
      {"parallelism", cfg.parallelism},
      {"verb1s_own_answer", cfg.verb1s_own_answer},
      {"strict_em", cfg.strict_em},
      {"share_dir", cfg.share_dir},
      {"refusal_lexicon", cfg.refusal_lexicon_path},
      {"classify_with", cfg.classify_with},
      {"rag", cfg.rag}};
}

std::string timestamp_for_dir() {
  std::string t = util::utc_now_iso8601();  // 2026-01-02T03:04:05Z
  std::string out;
  for (char c : t) {
    if (c == '-' || c == ':' || c == 'Z') continue;
    out.push_back(c == 'T' ? '-' : c);
  }
  return out;
}

void resolve_output_dir(CliState& state, const std::string& kind) {
  if (!state.run.output_dir.empty()) return;
  std::string dataset_tag = state.run.dataset_path.empty()
                                ? kind
                                : fs::path(state.run.dataset_path).stem().string();
  state.run.output_dir = state.runs_root + "/" + dataset_tag + "_" +
                         state.run.endpoint.model_name + "_" +
                         timestamp_for_dir();
}

void snapshot_config(const CliState& state, const std::string& command) {
  fs::create_directories(state.run.output_dir);
  json snap = run_config_to_json(state.run);
  snap["command"] = command;
  if (!state.baseline_dir.empty()) snap["baseline"] = state.baseline_dir;
  util::write_file(state.run.output_dir + "/config.json",
                   snap.dump(2) + "\n");
}

void apply_verifier_urls(CliState& state) {
  for (const auto& spec : state.verifier_urls) {
    auto eq = spec.find('=');
    client::EndpointConfig ep = state.run.endpoint;
    if (eq == std::string::npos) {
      ep.base_url = spec;
    } else {
      ep.base_url = spec.substr(0, eq);
      ep.model_name = spec.substr(eq + 1);
    }
    state.vote.verifier_endpoints.push_back(std::move(ep));
  }
}

int dump_prompts(const CliState& state,
                 const std::vector<prompts::TemplateId>& ids) {
  std::string share = state.run.share_dir.empty()
                          ? prompts::PromptLibrary::default_share_dir()
                          : state.run.share_dir;
  auto lib = prompts::PromptLibrary::load(share);
  std::cout << lib.dump(ids);
  return 0;
}

const std::vector<prompts::TemplateId> kAuditTemplates = {
    prompts::TemplateId::Logits, prompts::TemplateId::PTrue,
    prompts::TemplateId::Consistency, prompts::TemplateId::Verb1S,
    prompts::TemplateId::Verb2S};

const std::vector<prompts::TemplateId> kHonestyTemplates = {
    prompts::TemplateId::HonestyCanRefuse,
    prompts::TemplateId::HonestyLessRefuse,
    prompts::TemplateId::HonestyMoreRefuse,
    prompts::TemplateId::HonestyMediumRefuse,
    prompts::TemplateId::HonestyHighRefuse,
    prompts::TemplateId::HonestyMostRefuse};

void print_summary(const report::RunReport& rep, const std::string& dir) {
  std::cout << "run " << rep.run_id << " -> " << dir << "\n";
  for (const auto& [method, m] : rep.per_method) {
    std::cout << "  " << method << ": accuracy " << m.accuracy << ", ER "
              << m.error_rate << ", reject " << m.reject_rate
              << ", delusion " << m.delusion_rate_overall;
    if (m.delusion_share_of_errors.has_value()) {
      std::cout << " (in errors " << *m.delusion_share_of_errors << ")";
    }
    std::cout << "\n";
  }
  for (const auto& w : rep.warnings) std::cout << "  warning: " << w << "\n";
}

int run_cli(int argc, char** argv) {
  CLI::App app{"delusion auditing toolkit for chat-completion endpoints"};
  app.require_subcommand(1);

  CliState state;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", state.config_path, "JSON config file");
    cmd->add_option("--base-url", state.run.endpoint.base_url,
                    "endpoint URL (http(s)://... or mock:<script.json>)");
    cmd->add_option("--model", state.run.endpoint.model_name, "model name");
    cmd->add_option("--api-key-env", state.run.endpoint.api_key_env,
                    "environment variable holding the API key");
    cmd->add_option("--timeout", state.run.endpoint.request_timeout_s,
                    "request timeout in seconds");
    cmd->add_option("--max-retries", state.run.endpoint.max_retries,
                    "retries for transient failures");
    cmd->add_option("--max-parallel", state.run.endpoint.max_parallel,
                    "endpoint parallelism ceiling");
    cmd->add_option("--parallelism", state.run.parallelism,
                    "requests in flight (default: max-parallel)");
    cmd->add_option("--seed", state.run.seed, "run seed");
    cmd->add_option("--output-dir", state.run.output_dir,
                    "run directory (default: <runs-root>/<auto>)");
    cmd->add_option("--runs-root", state.runs_root,
                    "root for auto-named run directories");
    cmd->add_option("--share-dir", state.run.share_dir,
                    "directory holding prompts/ and lexicon files");
    cmd->add_option("--refusal-lexicon", state.run.refusal_lexicon_path,
                    "refusal lexicon file");
    cmd->add_flag("--strict-em", state.run.strict_em,
                  "grade by exact canonical equality only");
    cmd->add_flag("--dry-run", state.dry_run,
                  "print the exact prompt set and exit");
    return cmd;
  };

  auto add_audit_options = [&](CLI::App* cmd) {
    cmd->add_option("--dataset", state.run.dataset_path, "dataset JSONL");
    cmd->add_option("--methods", state.methods_csv,
                    "comma list: raw_logits,agreement,p_true,verb_1s,verb_2s");
    cmd->add_option("--ensemble", state.ensemble_csv,
                    "comma list of methods to ensemble");
    cmd->add_flag("--raw-scores", state.raw_scores,
                  "threshold/classify on raw scores instead of normalized");
    cmd->add_option("--consistency-n", state.run.consistency_n,
                    "samples for the agreement method");
    cmd->add_option("--top-logprobs", state.run.top_logprobs_k,
                    "top alternatives requested for p_true");
    cmd->add_flag("--verb1s-own-answer", state.run.verb1s_own_answer,
                  "grade the verb_1s answer for the verb_1s column");
    cmd->add_option("--classify-with", state.run.classify_with,
                    "method (or \"ensemble\") for stored verdicts");
    cmd->add_option("--resume-from", state.resume_from,
                    "re-score records.jsonl from a previous run directory");
  };

  CLI::App* audit = add_common(app.add_subcommand(
      "audit", "grade answers, score beliefs, classify delusions"));
  add_audit_options(audit);

  CLI::App* rag = add_common(app.add_subcommand(
      "rag", "audit with retrieval passages in the prompt"));
  add_audit_options(rag);

  CLI::App* honesty = add_common(app.add_subcommand(
      "honesty", "re-ask baseline errors under the six honesty prompts"));
  honesty->add_option("--baseline", state.baseline_dir, "baseline run dir")
      ;
  bool honesty_all = false;
  honesty->add_flag("--all-items", honesty_all,
                    "re-ask every item, not just baseline errors");
  add_audit_options(honesty);

  CLI::App* reflect = add_common(app.add_subcommand(
      "reflect", "ask the model to reconsider its previous answers"));
  reflect->add_option("--baseline", state.baseline_dir, "baseline run dir");
  add_audit_options(reflect);

  CLI::App* debate = add_common(app.add_subcommand(
      "debate", "multi-agent voting over a baseline run"));
  debate->add_option("--baseline", state.baseline_dir, "baseline run dir");
  debate->add_option("--verifier", state.verifier_urls,
                     "verifier endpoint as url[=model]; repeatable");
  debate->add_option("--threshold", state.vote.threshold,
                     "minimum verifier matches to keep an answer");
  debate->add_flag("--strict-match", state.vote.strict_match,
                   "verifier match by exact canonical equality");
  add_audit_options(debate);

  // Data construction commands.
  noise::NoiseSpec noise_spec;
  std::string out_file;
  std::string removal_report_file;
  CLI::App* noise_gen = app.add_subcommand(
      "noise-gen", "synthesize perturbed wrong-answer training records");
  noise_gen->add_option("--dataset", state.run.dataset_path, "dataset JSONL")
      ->required();
  noise_gen->add_option("--proportion", noise_spec.proportion,
                        "fraction of items made noisy");
  noise_gen->add_option("--level", noise_spec.level, "noise level 1..4");
  noise_gen->add_option("--variants", noise_spec.variants_per_item,
                        "perturbed variants per noisy item");
  noise_gen->add_option("--seed", noise_spec.seed, "seed");
  noise_gen->add_option("--output", out_file, "output JSONL")->required();

  noise::SftSpec sft_spec;
  std::string records_file;
  CLI::App* sft_build = app.add_subcommand(
      "sft-build", "build a refusal-SFT set from graded records");
  sft_build->add_option("--records", records_file,
                        "records.jsonl from an audit run")
      ->required();
  sft_build->add_option("--refuse-ratio", sft_spec.refuse_ratio,
                        "fraction of refusal records, in (0,1)");
  sft_build->add_option("--total", sft_spec.total, "records to emit")
      ->required();
  sft_build->add_option("--seed", sft_spec.seed, "seed");
  sft_build->add_option("--refusal-text", sft_spec.refusal_text,
                        "assistant text for refusal records");
  sft_build->add_option("--output", out_file, "output JSONL")->required();

  noise::DedupOptions dedup_opts;
  std::string train_file;
  std::string delusions_file;
  std::string embedder_url = "mock:";
  std::string embedder_model = "paraphrase-MiniLM-L6-v2";
  CLI::App* refine = app.add_subcommand(
      "refine", "drop training records too close to known delusions");
  refine->add_option("--train", train_file, "training JSONL")->required();
  refine->add_option("--delusions", delusions_file,
                     "records.jsonl or {id,question,answer} JSONL")
      ->required();
  refine->add_option("--threshold", dedup_opts.sim_threshold,
                     "cosine similarity cutoff (strictly greater removes)");
  refine->add_flag("--embed-qa", dedup_opts.embed_qa,
                   "embed question+answer instead of question only");
  refine->add_option("--embedder-url", embedder_url,
                     "mock: or http(s)://... embeddings endpoint");
  refine->add_option("--embedder-model", embedder_model, "embeddings model");
  refine->add_option("--output", out_file, "filtered JSONL")->required();
  refine->add_option("--report", removal_report_file, "removal report CSV");

  std::string report_dir;
  std::string formats_csv = "json,csv,md";
  CLI::App* report_cmd =
      app.add_subcommand("report", "re-emit report files for a run");
  report_cmd->add_option("--run", report_dir, "run directory")->required();
  report_cmd->add_option("--formats", formats_csv, "subset of json,csv,md");

  std::string before_dir;
  std::string after_dir;
  std::string compare_out;
  CLI::App* compare_cmd =
      app.add_subcommand("compare", "delta table between two runs");
  compare_cmd->add_option("--before", before_dir, "baseline run dir")
      ->required();
  compare_cmd->add_option("--after", after_dir, "mitigated run dir")
      ->required();
  compare_cmd->add_option("--output", compare_out,
                          "write compare.md/compare.json here");

  // Flags win over the config file: the config is applied to the state
  // before parsing, so parsed options overwrite it.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string_view(argv[i]) == "--config") {
      state.config_path = argv[i + 1];
    }
  }
  apply_config_file(state);

  CLI11_PARSE(app, argc, argv);

  if (!state.methods_csv.empty()) {
    state.run.methods = parse_methods_csv(state.methods_csv);
  }
  if (!state.ensemble_csv.empty()) {
    state.run.ensemble_methods = parse_methods_csv(state.ensemble_csv);
  }
  if (state.raw_scores) state.run.normalized = false;
  apply_verifier_urls(state);

  if (audit->parsed() || rag->parsed()) {
    state.run.rag = rag->parsed();
    if (state.dry_run) {
      return dump_prompts(state, rag->parsed()
                                     ? std::vector<prompts::TemplateId>{
                                           prompts::TemplateId::Rag}
                                     : kAuditTemplates);
    }
    if (state.run.dataset_path.empty() && state.resume_from.empty()) {
      throw ConfigError("audit requires --dataset (or --resume-from)");
    }
    resolve_output_dir(state, "audit");
    pipeline::AuditOutput out;
    if (!state.resume_from.empty()) {
      if (state.run.dataset_path.empty()) {
        state.run.dataset_path = state.resume_from + "/records.jsonl";
      }
      out = pipeline::load_baseline(state.run, state.resume_from);
    } else {
      out = pipeline::run_audit(state.run);
    }
    pipeline::write_outputs(state.run, out);
    snapshot_config(state, state.run.rag ? "rag" : "audit");
    print_summary(out.run_report, state.run.output_dir);
    return 0;
  }

  if (honesty->parsed() || reflect->parsed() || debate->parsed()) {
    std::string command = honesty->parsed()   ? "honesty"
                          : reflect->parsed() ? "reflect"
                                              : "debate";
    if (state.dry_run) {
      if (honesty->parsed()) return dump_prompts(state, kHonestyTemplates);
      if (reflect->parsed()) {
        return dump_prompts(state, {prompts::TemplateId::Reflection});
      }
      return dump_prompts(state, {prompts::TemplateId::Logits});
    }
    if (state.baseline_dir.empty()) {
      throw ConfigError(command +
                        " requires --baseline (a previous audit run "
                        "directory; run `delaudit audit` first)");
    }
    if (state.run.dataset_path.empty()) {
      state.run.dataset_path = state.baseline_dir + "/records.jsonl";
    }
    resolve_output_dir(state, command);
    pipeline::AuditOutput baseline =
        pipeline::load_baseline(state.run, state.baseline_dir);
    report::RunReport rep;
    if (honesty->parsed()) {
      protocols::HonestyOptions opts;
      opts.reask_all = honesty_all;
      rep = pipeline::run_honesty(state.run, baseline, opts);
    } else if (reflect->parsed()) {
      rep = pipeline::run_reflect(state.run, baseline);
    } else {
      rep = pipeline::run_debate(state.run, std::move(baseline), state.vote);
    }
    snapshot_config(state, command);
    print_summary(rep, state.run.output_dir);
    return 0;
  }

  if (noise_gen->parsed()) {
    auto items = core::load_dataset(state.run.dataset_path);
    auto set = noise::synthesize_noise_set(items, noise_spec);
    noise::save_training_records(set.records, out_file);
    for (const auto& w : set.warnings) std::cout << "warning: " << w << "\n";
    std::cout << set.records.size() << " training records -> " << out_file
              << "\n";
    return 0;
  }

  if (sft_build->parsed()) {
    auto records = core::load_records(records_file);
    auto set = noise::build_refusal_sft_set(records, sft_spec);
    noise::save_training_records(set, out_file);
    std::cout << set.size() << " training records -> " << out_file << "\n";
    return 0;
  }

  if (refine->parsed()) {
    auto train = noise::load_training_records(train_file);
    auto delusions = noise::load_delusion_examples(delusions_file);
    client::EndpointConfig ep;
    ep.base_url = embedder_url;
    ep.model_name = embedder_model;
    auto embedder = noise::make_embedder(ep);
    auto result = noise::dedup_refine(train, delusions, *embedder, dedup_opts);
    noise::save_training_records(result.kept, out_file);
    if (!removal_report_file.empty()) {
      noise::write_removal_report_csv(removal_report_file, result.removed);
    }
    std::cout << "kept " << result.kept.size() << ", removed "
              << result.removed.size() << " -> " << out_file << "\n";
    return 0;
  }

  if (report_cmd->parsed()) {
    auto rep = report::load_report(report_dir + "/report.json");
    std::set<report::Format> formats;
    if (formats_csv.find("json") != std::string::npos) {
      formats.insert(report::Format::Json);
    }
    if (formats_csv.find("csv") != std::string::npos) {
      formats.insert(report::Format::Csv);
    }
    if (formats_csv.find("md") != std::string::npos) {
      formats.insert(report::Format::Markdown);
    }
    report::emit(rep, report_dir, formats);
    std::cout << "report files refreshed in " << report_dir << "\n";
    return 0;
  }

  if (compare_cmd->parsed()) {
    auto before = report::load_report(before_dir + "/report.json");
    auto after = report::load_report(after_dir + "/report.json");
    auto deltas = report::compare_runs(before, after);
    std::string table = report::delta_table_markdown(deltas);
    if (compare_out.empty()) {
      std::cout << table;
    } else {
      fs::create_directories(compare_out);
      util::write_file(compare_out + "/compare.md", table);
      util::write_file(compare_out + "/compare.json",
                       report::deltas_to_json(deltas).dump(2) + "\n");
      std::cout << "delta table -> " << compare_out << "\n";
    }
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const TransportError& e) {
    std::cerr << "transport error: " << e.what() << "\n";
    return 3;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 4;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
