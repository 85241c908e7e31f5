#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "delaudit/calibrate.hpp"
#include "delaudit/errors.hpp"
#include "delaudit/util.hpp"

using namespace delaudit;
using namespace delaudit::calibrate;

namespace {

AuditRecord scored_record(const std::string& id, Outcome outcome,
                          double raw_logits) {
  AuditRecord r;
  r.item = QAItem{id, "q " + id, {"gold"}, std::nullopt, "unit"};
  r.belief.item_id = id;
  r.verdict.item_id = id;
  r.verdict.outcome = outcome;
  if (outcome != Outcome::Rejected) {
    r.belief.raw[Method::RawLogits] = raw_logits;
  }
  return r;
}

std::map<std::string, double> random_scores(std::mt19937_64& rng, int n,
                                            bool force_ties) {
  std::map<std::string, double> scores;
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  double tie_value = dist(rng);
  for (int i = 0; i < n; ++i) {
    double v = dist(rng);
    if (force_ties && util::bounded(rng, 3) == 0) v = tie_value;
    scores["item" + std::to_string(i)] = v;
  }
  return scores;
}

}  // namespace

TEST_CASE("rank_normalize definition") {
  auto out = rank_normalize({{"a", 0.2}, {"b", 0.9}, {"c", 0.5}});
  CHECK(out.at("a") == doctest::Approx(1.0 / 3).epsilon(1e-15));
  CHECK(out.at("b") == 1.0);
  CHECK(out.at("c") == doctest::Approx(2.0 / 3).epsilon(1e-15));
}

TEST_CASE("rank_normalize tie rules") {
  auto two = rank_normalize({{"a", 0.4}, {"b", 0.4}});
  CHECK(two.at("a") == 0.75);
  CHECK(two.at("b") == 0.75);

  auto four = rank_normalize(
      {{"a", 0.4}, {"b", 0.4}, {"c", 0.4}, {"d", 0.4}});
  for (const auto& [id, v] : four) CHECK(v == 0.625);

  CHECK_THROWS_AS(rank_normalize({}), ContractError);
}

TEST_CASE("rank_normalize properties over random score sets") {
  std::mt19937_64 rng(2024);
  for (int iter = 0; iter < 200; ++iter) {
    int n = 1 + static_cast<int>(util::bounded(rng, 30));
    auto scores = random_scores(rng, n, true);
    auto normalized = rank_normalize(scores);
    REQUIRE(normalized.size() == scores.size());

    for (const auto& [i, si] : scores) {
      CHECK(normalized.at(i) > 0.0);
      CHECK(normalized.at(i) <= 1.0);
      for (const auto& [j, sj] : scores) {
        if (si < sj) CHECK(normalized.at(i) < normalized.at(j));
        if (si == sj) CHECK(normalized.at(i) == normalized.at(j));
      }
    }

    // Strictly increasing transforms leave the output bit-identical.
    std::map<std::string, double> cubed;
    std::map<std::string, double> affine;
    for (const auto& [id, v] : scores) {
      cubed[id] = v * v * v;
      affine[id] = 2.0 * v + 1.0;
    }
    CHECK(rank_normalize(cubed) == normalized);
    CHECK(rank_normalize(affine) == normalized);
  }
}

TEST_CASE("belief_threshold is the mean over correct records only") {
  std::vector<AuditRecord> records;
  records.push_back(scored_record("a", Outcome::Correct, 0.6));
  records.push_back(scored_record("b", Outcome::Correct, 0.8));
  records.push_back(scored_record("c", Outcome::Correct, 1.0));
  records.push_back(scored_record("d", Outcome::Incorrect, 0.99));
  records.push_back(scored_record("e", Outcome::Incorrect, 0.99));
  records.push_back(scored_record("f", Outcome::Rejected, 0.0));

  auto spec = belief_threshold(records, "raw_logits", false);
  CHECK(spec.threshold == (0.6 + 0.8 + 1.0) / 3.0);
  CHECK(spec.threshold == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(spec.n_correct_used == 3);
  CHECK_FALSE(spec.normalized);
}

TEST_CASE("belief_threshold single record and undefined cases") {
  std::vector<AuditRecord> one{scored_record("a", Outcome::Correct, 0.42)};
  CHECK(belief_threshold(one, "raw_logits", false).threshold == 0.42);

  std::vector<AuditRecord> none{scored_record("a", Outcome::Incorrect, 0.9)};
  CHECK_THROWS_AS(belief_threshold(none, "raw_logits", false), DataError);
}

TEST_CASE("classify: strict threshold boundary") {
  std::vector<AuditRecord> records;
  records.push_back(scored_record("hi", Outcome::Incorrect, 0.85));
  records.push_back(scored_record("eq", Outcome::Incorrect, 0.8));
  records.push_back(scored_record("ok", Outcome::Correct, 0.99));
  records.push_back(scored_record("rj", Outcome::Rejected, 0.0));

  ThresholdSpec spec{"raw_logits", 0.8, 1, false};
  classify(records, spec);
  CHECK(records[0].verdict.classification == Classification::Delusion);
  CHECK(records[1].verdict.classification == Classification::Hallucination);
  CHECK(records[2].verdict.classification == Classification::None);
  CHECK(records[3].verdict.classification == Classification::None);
  CHECK(records[0].verdict.belief_used == 0.85);
  CHECK(records[0].verdict.threshold_used == 0.8);
}

TEST_CASE("classify: unscored incorrect records become hallucinations") {
  std::vector<AuditRecord> records;
  records.push_back(scored_record("a", Outcome::Incorrect, 0.9));
  records[0].belief.raw.clear();
  records[0].belief.parse_failed.insert(Method::RawLogits);
  classify(records, ThresholdSpec{"raw_logits", 0.5, 1, false});
  CHECK(records[0].verdict.classification == Classification::Hallucination);
  CHECK_FALSE(records[0].verdict.belief_used.has_value());
}

TEST_CASE("classify partitions incorrect records exactly") {
  std::mt19937_64 rng(555);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<AuditRecord> records;
    int n = 1 + static_cast<int>(util::bounded(rng, 40));
    int incorrect = 0;
    for (int i = 0; i < n; ++i) {
      Outcome o = static_cast<Outcome>(util::bounded(rng, 3));
      incorrect += o == Outcome::Incorrect ? 1 : 0;
      records.push_back(
          scored_record("r" + std::to_string(i), o, dist(rng)));
    }
    classify(records, ThresholdSpec{"raw_logits", dist(rng), 1, false});
    int delusions = 0;
    int hallucinations = 0;
    for (const auto& r : records) {
      delusions += r.verdict.classification == Classification::Delusion;
      hallucinations +=
          r.verdict.classification == Classification::Hallucination;
    }
    CHECK(delusions + hallucinations == incorrect);
  }
}

TEST_CASE("classification partition is invariant under monotone transforms") {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  for (int iter = 0; iter < 50; ++iter) {
    int n = 3 + static_cast<int>(util::bounded(rng, 25));
    std::vector<AuditRecord> base;
    bool any_correct = false;
    for (int i = 0; i < n; ++i) {
      Outcome o = util::bounded(rng, 3) == 0 ? Outcome::Incorrect
                                             : Outcome::Correct;
      any_correct = any_correct || o == Outcome::Correct;
      base.push_back(scored_record("r" + std::to_string(i), o, dist(rng)));
    }
    if (!any_correct) base[0].verdict.outcome = Outcome::Correct;

    auto run = [](std::vector<AuditRecord> records) {
      apply_rank_normalization(records,
                               std::vector<Method>{Method::RawLogits});
      auto spec = belief_threshold(records, "raw_logits", true);
      classify(records, spec);
      std::vector<Classification> out;
      for (const auto& r : records) out.push_back(r.verdict.classification);
      return out;
    };

    auto baseline = run(base);
    for (int variant = 0; variant < 2; ++variant) {
      std::vector<AuditRecord> transformed = base;
      for (auto& r : transformed) {
        double& v = r.belief.raw[Method::RawLogits];
        v = variant == 0 ? v * v * v : 2.0 * v + 1.0;
      }
      CHECK(run(transformed) == baseline);
    }
  }
}

TEST_CASE("ensemble: mean of available normalized scores") {
  std::vector<AuditRecord> records(3);
  for (int i = 0; i < 3; ++i) {
    records[i].item.id = "r" + std::to_string(i);
    records[i].belief.item_id = records[i].item.id;
    records[i].verdict.outcome = Outcome::Correct;
  }
  records[0].belief.normalized = {{Method::RawLogits, 0.2},
                                  {Method::Agreement, 0.4},
                                  {Method::PTrue, 0.9}};
  records[1].belief.normalized = {{Method::RawLogits, 0.3},
                                  {Method::PTrue, 0.5}};
  records[2].belief.normalized = {};

  EnsembleOptions opts{{Method::RawLogits, Method::Agreement, Method::PTrue},
                       true};
  apply_ensemble(records, opts);

  CHECK(records[0].belief.ensemble == doctest::Approx(0.5).epsilon(1e-15));
  CHECK_FALSE(records[0].belief.ensemble_partial);
  CHECK(records[1].belief.ensemble == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(records[1].belief.ensemble_partial);
  CHECK_FALSE(records[2].belief.ensemble.has_value());
}

TEST_CASE("ensemble idempotence: identical per-method scores pass through") {
  std::vector<AuditRecord> records(1);
  records[0].item.id = "r";
  records[0].verdict.outcome = Outcome::Correct;
  records[0].belief.normalized = {{Method::RawLogits, 0.7},
                                  {Method::Agreement, 0.7},
                                  {Method::PTrue, 0.7}};
  apply_ensemble(records, EnsembleOptions{
                              {Method::RawLogits, Method::Agreement,
                               Method::PTrue},
                              true});
  CHECK(records[0].belief.ensemble == 0.7);
}

TEST_CASE("single-method ensemble classifies exactly like the method") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  std::vector<AuditRecord> records;
  for (int i = 0; i < 20; ++i) {
    Outcome o = i % 3 == 0 ? Outcome::Incorrect : Outcome::Correct;
    records.push_back(scored_record("r" + std::to_string(i), o, dist(rng)));
  }
  apply_rank_normalization(records, std::vector<Method>{Method::RawLogits});
  apply_ensemble(records, EnsembleOptions{{Method::RawLogits}, true});

  auto method_spec = belief_threshold(records, "raw_logits", true);
  auto ens_spec = belief_threshold(records, "ensemble", true);
  CHECK(method_spec.threshold == ens_spec.threshold);

  auto a = records;
  auto b = records;
  classify(a, method_spec);
  classify(b, ens_spec);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].verdict.classification == b[i].verdict.classification);
  }
}

TEST_CASE("rank pool excludes rejected and parse_failed records") {
  std::vector<AuditRecord> records;
  records.push_back(scored_record("a", Outcome::Correct, 0.5));
  records.push_back(scored_record("b", Outcome::Rejected, 0.0));
  records.push_back(scored_record("c", Outcome::Incorrect, 0.9));
  records.push_back(scored_record("d", Outcome::Incorrect, 0.1));
  records[3].belief.raw.clear();
  records[3].belief.parse_failed.insert(Method::RawLogits);

  apply_rank_normalization(records, std::vector<Method>{Method::RawLogits});
  CHECK(records[0].belief.normalized.at(Method::RawLogits) == 0.5);
  CHECK(records[2].belief.normalized.at(Method::RawLogits) == 1.0);
  CHECK(records[1].belief.normalized.count(Method::RawLogits) == 0);
  CHECK(records[3].belief.normalized.count(Method::RawLogits) == 0);
}
