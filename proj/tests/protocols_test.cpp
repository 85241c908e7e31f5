#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include <json.hpp>

#include "delaudit/errors.hpp"
#include "delaudit/mock_backend.hpp"
#include "delaudit/protocols.hpp"
#include "delaudit/util.hpp"

using namespace delaudit;
using namespace delaudit::protocols;
using nlohmann::json;

namespace {

prompts::PromptLibrary test_library() {
  return prompts::PromptLibrary::load(std::string(DELAUDIT_SOURCE_DIR) +
                                      "/share");
}

client::ChatClient client_for(const json& script) {
  client::EndpointConfig cfg;
  cfg.base_url = "mock:unused";
  return client::ChatClient(cfg, client::MockBackend::from_json(script));
}

AuditRecord baseline_record(const std::string& id, Outcome o,
                            Classification c, const std::string& answer) {
  AuditRecord r;
  r.item = QAItem{id, "question " + id, {"gold " + id}, std::nullopt, "unit"};
  GenerationTrace t;
  t.item_id = id;
  t.role_tag = RoleTag::Answer;
  t.output_text = answer;
  t.created_at = "1970-01-01T00:00:00Z";
  r.traces.push_back(std::move(t));
  r.verdict = Verdict{id, o, c, std::nullopt, std::nullopt};
  return r;
}

}  // namespace

TEST_CASE("honesty battery: refuse rates per baseline class") {
  // Four baseline delusions (d0 refuses under every prompt) and two
  // hallucinations (both refuse).
  std::vector<AuditRecord> baseline;
  for (int i = 0; i < 4; ++i) {
    baseline.push_back(baseline_record("d" + std::to_string(i),
                                       Outcome::Incorrect,
                                       Classification::Delusion, "wrong"));
  }
  for (int i = 0; i < 2; ++i) {
    baseline.push_back(baseline_record("h" + std::to_string(i),
                                       Outcome::Incorrect,
                                       Classification::Hallucination,
                                       "wrong"));
  }
  baseline.push_back(baseline_record("c0", Outcome::Correct,
                                     Classification::None, "gold c0"));

  json script = json::parse(R"({"default_behavior": "error", "entries": []})");
  auto add = [&](const std::string& question, const std::string& reply) {
    json e;
    e["match"] = json::array({question});
    e["completions"] = json::array({reply});
    script["entries"].push_back(e);
  };
  add("question d0", "I don't know");
  add("question d1", "still wrong");
  add("question d2", "still wrong");
  add("question d3", "still wrong");
  add("question h0", "I don't know");
  add("question h1", "I don't know");
  add("question c0", "gold c0");

  auto chat = client_for(script);
  auto lib = test_library();
  auto run = honesty_battery(chat, lib, baseline, {}, {});

  REQUIRE(run.per_prompt.size() == 6);
  for (const auto& p : run.per_prompt) {
    CHECK(p.n_delusion == 4);
    CHECK(p.n_hallucination == 2);
    CHECK(p.delusion_refuse_rate() == 0.25);
    CHECK(p.hallucination_refuse_rate() == 1.0);
    CHECK(p.n_asked == 6);  // correct baseline items are not re-asked
    CHECK(p.error_rate_now() == 0.5);
    CHECK(p.n_skipped == 0);
  }
  CHECK(run.per_prompt[0].prompt_tag == "helpful_can_refuse");
  CHECK(run.per_prompt[5].prompt_tag == "helpful_most_refuse");
  // Six prompts, six re-asked items each.
  CHECK(run.traces.size() == 36);
}

TEST_CASE("honesty battery: unlabeled baseline errors are skipped") {
  std::vector<AuditRecord> baseline;
  baseline.push_back(baseline_record("x", Outcome::Incorrect,
                                     Classification::None, "wrong"));
  baseline.push_back(baseline_record("d", Outcome::Incorrect,
                                     Classification::Delusion, "wrong"));
  json script = json::parse(
      R"({"entries": [{"match": ["question d"], "completions": ["nope"]}]})");
  auto chat = client_for(script);
  auto lib = test_library();
  auto run = honesty_battery(chat, lib, baseline, {}, {});
  for (const auto& p : run.per_prompt) {
    CHECK(p.n_skipped == 1);
    CHECK(p.n_asked == 1);
  }
}

TEST_CASE("honesty battery: reask_all also covers correct items") {
  std::vector<AuditRecord> baseline;
  baseline.push_back(baseline_record("c0", Outcome::Correct,
                                     Classification::None, "gold c0"));
  baseline.push_back(baseline_record("d0", Outcome::Incorrect,
                                     Classification::Delusion, "wrong"));
  json script = json::parse(R"({"default_behavior": "echo", "entries": []})");
  auto chat = client_for(script);
  auto lib = test_library();
  HonestyOptions opts;
  opts.reask_all = true;
  auto run = honesty_battery(chat, lib, baseline, {}, opts);
  for (const auto& p : run.per_prompt) CHECK(p.n_asked == 2);
}

TEST_CASE("reflection outcomes") {
  QAItem item{"q", "What is the capital?", {"Paris"}, std::nullopt, "unit"};
  grading::GradingOptions opts;

  CHECK(classify_reflection(item, "Lyon", "I insist.", opts).outcome ==
        ReflectionKind::Insist);
  CHECK(classify_reflection(item, "Lyon", "After reflection: Paris", opts)
            .outcome == ReflectionKind::RevisedCorrect);
  CHECK(classify_reflection(item, "Lyon", "It is Marseille", opts).outcome ==
        ReflectionKind::RevisedIncorrect);
  CHECK(classify_reflection(item, "Lyon", "I don't know", opts).outcome ==
        ReflectionKind::RevisedReject);
  // Restating the same canonical answer counts as insisting.
  CHECK(classify_reflection(item, "Lyon", "  LYON!", opts).outcome ==
        ReflectionKind::Insist);
}

TEST_CASE("reflect_all: scripted insistence, baseline untouched") {
  std::vector<AuditRecord> baseline;
  baseline.push_back(baseline_record("a", Outcome::Incorrect,
                                     Classification::Delusion, "wrong a"));
  baseline.push_back(baseline_record("b", Outcome::Correct,
                                     Classification::None, "gold b"));
  baseline.push_back(baseline_record("r", Outcome::Rejected,
                                     Classification::None, "I don't know"));
  auto before = baseline;

  json script = json::parse(
      R"({"entries": [{"match": ["Previous Answer:"],
                       "completions": ["I insist."]}]})");
  auto chat = client_for(script);
  auto lib = test_library();
  auto run = reflect_all(chat, lib, baseline, {}, 2);

  REQUIRE(run.outcomes.size() == 2);  // rejected items are not reflected
  for (const auto& o : run.outcomes) {
    CHECK(o.outcome == ReflectionKind::Insist);
  }
  CHECK(baseline == before);
}

TEST_CASE("reflection prompt carries question and previous answer") {
  auto lib = test_library();
  QAItem item{"q", "Why is the sky blue?", {"scattering"}, std::nullopt, "u"};
  auto req = build_reflection_request(lib, item, "Because of mirrors");
  REQUIRE(req.messages.size() == 2);
  CHECK(req.messages[1].text.find("Question: Why is the sky blue?") !=
        std::string::npos);
  CHECK(req.messages[1].text.find("Previous Answer: Because of mirrors") !=
        std::string::npos);
  CHECK(req.role_tag == RoleTag::Reflection);
}

TEST_CASE("vote_keep thresholds and monotonicity") {
  CHECK_FALSE(vote_keep(2, 3));
  CHECK(vote_keep(2, 2));
  CHECK(vote_keep(3, 1));

  std::mt19937_64 rng(606);
  for (int iter = 0; iter < 200; ++iter) {
    int matches = static_cast<int>(util::bounded(rng, 4));
    bool kept_prev = true;
    for (int threshold = 1; threshold <= 3; ++threshold) {
      bool kept = vote_keep(matches, threshold);
      // Raising the threshold can only discard more.
      CHECK((kept_prev || !kept));
      kept_prev = kept;
    }
  }
}

TEST_CASE("vote_verify: matches, failures, and keep decision") {
  QAItem item{"v", "Name the planet.", {"Mars"}, std::nullopt, "unit"};

  json ok_script = json::parse(
      R"({"entries": [{"match": ["Name the planet."],
                       "completions": ["It is Mars"]}]})");
  json wrong_script = json::parse(
      R"({"entries": [{"match": ["Name the planet."],
                       "completions": ["Venus"]}]})");
  json dead_script = json::parse(
      R"({"entries": [{"match": ["Name the planet."], "error_always": true}]})");

  VoteConfig config;
  for (int i = 0; i < 3; ++i) {
    client::EndpointConfig ep;
    ep.base_url = "mock:unused";
    ep.model_name = "verifier" + std::to_string(i);
    ep.max_retries = 0;
    config.verifier_endpoints.push_back(ep);
  }
  config.threshold = 3;

  auto make_clients = [&] {
    std::vector<client::ChatClient> clients;
    clients.push_back(client_for(ok_script));
    clients.push_back(client_for(ok_script));
    clients.push_back(client_for(wrong_script));
    for (auto& c : clients) c.set_sleep_hook([](double) {});
    return clients;
  };

  auto lib = test_library();
  {
    auto clients = make_clients();
    auto outcome = vote_verify(item, "Mars", config, clients, lib);
    CHECK(outcome.match_count() == 2);
    CHECK_FALSE(outcome.kept);  // 2 matches < threshold 3
  }
  config.threshold = 2;
  {
    auto clients = make_clients();
    auto outcome = vote_verify(item, "Mars", config, clients, lib);
    CHECK(outcome.kept);
  }
  {
    // A failing verifier counts as a flagged non-match.
    std::vector<client::ChatClient> clients;
    clients.push_back(client_for(ok_script));
    clients.push_back(client_for(ok_script));
    clients.push_back(client_for(dead_script));
    for (auto& c : clients) c.set_sleep_hook([](double) {});
    auto outcome = vote_verify(item, "Mars", config, clients, lib);
    CHECK(outcome.match_count() == 2);
    CHECK(outcome.verifiers[2].failed);
    CHECK(outcome.kept);
  }
}

TEST_CASE("vote config validation") {
  VoteConfig config;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  client::EndpointConfig ep;
  ep.base_url = "mock:x";
  config.verifier_endpoints = {ep, ep};
  config.threshold = 3;
  CHECK_THROWS_AS(config.validate(), ConfigError);
  config.threshold = 2;
  CHECK_NOTHROW(config.validate());
}

TEST_CASE("rag request renders numbered passages in order") {
  auto lib = test_library();
  QAItem item{"r", "What is the speed?", {"fast"}, std::nullopt, "unit"};
  std::vector<std::string> passages;
  for (int i = 1; i <= 20; ++i) {
    passages.push_back("passage body " + std::to_string(i));
  }
  item.passages = passages;

  auto req = build_rag_request(lib, item);
  const std::string& user = req.messages[1].text;
  std::size_t prev = 0;
  for (int i = 1; i <= 20; ++i) {
    std::string header = "Document " + std::to_string(i) + ":\npassage body " +
                         std::to_string(i);
    auto pos = user.find(header);
    REQUIRE(pos != std::string::npos);
    CHECK(pos > prev);
    prev = pos;
  }
  CHECK(req.want_logprobs);
  CHECK(req.sampling.greedy());

  QAItem bare{"b", "q", {"a"}, std::nullopt, "unit"};
  CHECK_THROWS_AS(build_rag_request(lib, bare), ContractError);
  bare.passages = std::vector<std::string>{};
  CHECK_THROWS_AS(build_rag_request(lib, bare), ContractError);
}
