#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include <json.hpp>

#include "delaudit/errors.hpp"
#include "delaudit/pipeline.hpp"
#include "delaudit/records.hpp"
#include "delaudit/util.hpp"

using namespace delaudit;
using namespace delaudit::pipeline;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kSource = DELAUDIT_SOURCE_DIR;

RunConfig fixture_config(const std::string& out_name) {
  RunConfig cfg;
  cfg.endpoint.base_url = "mock:" + kSource +
                          "/tests/fixtures/fixture10_mock.json";
  cfg.endpoint.model_name = "mock-model";
  cfg.dataset_path = kSource + "/tests/fixtures/fixture10.jsonl";
  cfg.methods = {Method::RawLogits};
  cfg.share_dir = kSource + "/share";
  cfg.seed = 5;
  auto dir = fs::temp_directory_path() / ("delaudit_pipe_" + out_name);
  fs::remove_all(dir);
  cfg.output_dir = dir.string();
  return cfg;
}

}  // namespace

TEST_CASE("mock audit reproduces the fixture ratios") {
  auto cfg = fixture_config("ratios");
  auto out = run_audit(cfg);
  REQUIRE(out.records.size() == 10);

  const auto& m = out.run_report.per_method.at("raw_logits");
  CHECK(m.accuracy == 0.6);
  CHECK(m.error_rate == 0.3);
  CHECK(m.reject_rate == 0.1);
  CHECK(m.delusion_rate_overall == 0.2);
  REQUIRE(m.delusion_share_of_errors.has_value());
  CHECK(*m.delusion_share_of_errors == doctest::Approx(2.0 / 3).epsilon(1e-12));
  CHECK(m.threshold.normalized);
  CHECK(m.threshold.threshold ==
        doctest::Approx(14.0 / 27.0).epsilon(1e-12));
  CHECK(m.threshold.n_correct_used == 6);

  // Stored verdicts carry the classification of the selected method.
  std::map<std::string, Classification> cls;
  for (const auto& r : out.records) {
    cls[r.item.id] = r.verdict.classification;
  }
  CHECK(cls.at("i1") == Classification::Delusion);
  CHECK(cls.at("i2") == Classification::Delusion);
  CHECK(cls.at("i3") == Classification::Hallucination);
  CHECK(cls.at("c1") == Classification::None);
  CHECK(cls.at("r1") == Classification::None);

  CHECK(out.run_report.dataset_tag == "fixture10");
  CHECK(out.run_report.warnings.empty());
}

TEST_CASE("two audits with the same seed write byte-identical outputs") {
  auto cfg1 = fixture_config("bytes1");
  auto cfg2 = fixture_config("bytes2");
  write_outputs(cfg1, run_audit(cfg1));
  write_outputs(cfg2, run_audit(cfg2));
  for (const char* name :
       {"/records.jsonl", "/report.json", "/report.csv", "/report.md"}) {
    CHECK(util::read_file(cfg1.output_dir + name) ==
          util::read_file(cfg2.output_dir + name));
  }
}

TEST_CASE("rescore keeps traces and recomputes verdicts under new flags") {
  auto cfg = fixture_config("rescore");
  auto out = run_audit(cfg);
  write_outputs(cfg, out);

  // Raw-score thresholding changes the threshold space but not the traces.
  RunConfig raw_cfg = cfg;
  raw_cfg.normalized = false;
  auto records = core::load_records(cfg.output_dir + "/records.jsonl");
  auto rescored = rescore(raw_cfg, records);

  REQUIRE(rescored.records.size() == out.records.size());
  for (std::size_t i = 0; i < rescored.records.size(); ++i) {
    CHECK(rescored.records[i].traces == out.records[i].traces);
  }
  const auto& m = rescored.run_report.per_method.at("raw_logits");
  CHECK_FALSE(m.threshold.normalized);
  // Raw threshold = mean of the six planted correct scores.
  CHECK(m.threshold.threshold ==
        doctest::Approx((0.9 + 0.8 + 0.7 + 0.6 + 0.5 + 0.4) / 6)
            .epsilon(1e-12));
  // i1 (0.95) and i2 (0.85) still exceed it, i3 (0.1) does not.
  CHECK(m.n_delusion == 2);
}

TEST_CASE("unreachable endpoint surfaces a transport error naming the URL") {
  setenv("DELAUDIT_TEST_KEY", "dummy", 1);
  auto cfg = fixture_config("unreachable");
  cfg.endpoint.base_url = "http://127.0.0.1:9";
  cfg.endpoint.api_key_env = "DELAUDIT_TEST_KEY";
  cfg.endpoint.max_retries = 0;
  cfg.endpoint.request_timeout_s = 0.5;
  try {
    run_audit(cfg);
    FAIL("expected TransportError");
  } catch (const TransportError& e) {
    CHECK(std::string(e.what()).find("127.0.0.1:9") != std::string::npos);
  }
}

TEST_CASE("config validation catches inconsistent method selections") {
  auto cfg = fixture_config("badcfg");
  cfg.methods = {Method::RawLogits};
  cfg.ensemble_methods = std::vector<Method>{Method::PTrue};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg.ensemble_methods.reset();
  cfg.classify_with = "p_true";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg.classify_with = "ensemble";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);

  cfg.classify_with.clear();
  cfg.methods = {Method::Agreement};
  cfg.consistency_n = 1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("load_baseline requires a records file") {
  auto cfg = fixture_config("nobaseline");
  CHECK_THROWS_WITH_AS(load_baseline(cfg, "/nonexistent/run"),
                       doctest::Contains("records.jsonl"), ConfigError);
}

TEST_CASE("multi-method audit with ensemble on a generated fixture") {
  // Three items: one correct, two incorrect. Methods raw_logits + p_true
  // with an ensemble over both.
  auto dir = fs::temp_directory_path() / "delaudit_pipe_multi";
  fs::remove_all(dir);
  fs::create_directories(dir);

  std::string dataset;
  dataset += R"({"id":"a","question":"Qa?","answers":["alpha"],"source":"gen"})" "\n";
  dataset += R"({"id":"b","question":"Qb?","answers":["beta"],"source":"gen"})" "\n";
  dataset += R"({"id":"c","question":"Qc?","answers":["gamma"],"source":"gen"})" "\n";
  util::write_file((dir / "data.jsonl").string(), dataset);

  json script;
  script["default_behavior"] = "error";
  script["entries"] = json::array();
  auto add_answer = [&](const std::string& q, const std::string& text,
                        double lp) {
    json e;
    e["mode"] = "greedy";
    e["match"] = json::array({"accurately as possible.\n\nQuestion: " + q});
    e["completions"] =
        json::array({json{{"text", text},
                          {"logprobs", json::array({json::array({text, lp})})}}});
    script["entries"].push_back(e);
  };
  auto add_p_true = [&](const std::string& q, double t_lp, double f_lp) {
    json e;
    e["mode"] = "greedy";
    e["match"] = json::array({"Is the above answer correct?", "Question: " + q});
    json alts = json::array(
        {json::array({"True", t_lp}), json::array({"False", f_lp})});
    e["completions"] = json::array(
        {json{{"text", "True"},
              {"logprobs", json::array({json::array({"True", t_lp, alts})})}}});
    script["entries"].push_back(e);
  };
  add_p_true("Qa?", -0.1, -2.0);
  add_p_true("Qb?", -0.2, -1.0);
  add_p_true("Qc?", -1.5, -0.2);
  add_answer("Qa?", "alpha", -0.2);
  add_answer("Qb?", "wrong-b", -0.1);
  add_answer("Qc?", "wrong-c", -2.0);
  util::write_file((dir / "mock.json").string(), script.dump(2));

  RunConfig cfg;
  cfg.endpoint.base_url = "mock:" + (dir / "mock.json").string();
  cfg.dataset_path = (dir / "data.jsonl").string();
  cfg.methods = {Method::RawLogits, Method::PTrue};
  cfg.ensemble_methods = std::vector<Method>{Method::RawLogits, Method::PTrue};
  cfg.share_dir = kSource + "/share";
  cfg.output_dir = (dir / "out").string();

  auto out = run_audit(cfg);
  REQUIRE(out.records.size() == 3);
  CHECK(out.run_report.per_method.count("raw_logits") == 1);
  CHECK(out.run_report.per_method.count("p_true") == 1);
  CHECK(out.run_report.per_method.count("ensemble") == 1);

  // classify_with defaults to the ensemble when one is configured.
  CHECK(cfg.effective_classify_with() == "ensemble");
  for (const auto& r : out.records) {
    CHECK(r.belief.ensemble.has_value());
    CHECK(r.belief.normalized.count(Method::RawLogits) == 1);
    CHECK(r.belief.normalized.count(Method::PTrue) == 1);
    CHECK(r.find_trace(RoleTag::PTrue) != nullptr);
  }

  // p_true raw scores follow the planted softmax pairs.
  auto p_true_of = [&](const std::string& id) {
    for (const auto& r : out.records) {
      if (r.item.id == id) return r.belief.raw.at(Method::PTrue);
    }
    throw std::runtime_error("missing " + id);
  };
  CHECK(p_true_of("a") ==
        doctest::Approx(std::exp(-0.1) / (std::exp(-0.1) + std::exp(-2.0)))
            .epsilon(1e-12));
  CHECK(p_true_of("c") ==
        doctest::Approx(std::exp(-1.5) / (std::exp(-1.5) + std::exp(-0.2)))
            .epsilon(1e-12));
}
