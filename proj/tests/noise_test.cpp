#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cctype>
#include <filesystem>
#include <map>
#include <random>

#include "delaudit/dedup.hpp"
#include "delaudit/embed.hpp"
#include "delaudit/errors.hpp"
#include "delaudit/noise.hpp"
#include "delaudit/util.hpp"

using namespace delaudit;
using namespace delaudit::noise;
namespace fs = std::filesystem;

namespace {

// Independent oracle for the edit-distance-1 property.
int levenshtein(const std::string& a, const std::string& b) {
  std::vector<std::vector<int>> d(a.size() + 1,
                                  std::vector<int>(b.size() + 1, 0));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = static_cast<int>(i);
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      int sub = d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, sub});
    }
  }
  return d[a.size()][b.size()];
}

std::vector<QAItem> numeric_items(int n) {
  std::vector<QAItem> items;
  for (int i = 0; i < n; ++i) {
    items.push_back(QAItem{"n" + std::to_string(i),
                           "How many units in batch " + std::to_string(i) +
                               "?",
                           {std::to_string(1000 + 37 * i)},
                           std::nullopt,
                           "alcuna-like"});
  }
  return items;
}

AuditRecord graded_record(const std::string& id, Outcome o,
                          Classification c) {
  AuditRecord r;
  r.item = QAItem{id, "question " + id, {"gold " + id}, std::nullopt, "unit"};
  r.verdict = Verdict{id, o, c, std::nullopt, std::nullopt};
  return r;
}

std::string temp_file(const std::string& name) {
  return (fs::temp_directory_path() / ("delaudit_noise_" + name)).string();
}

}  // namespace

TEST_CASE("perturb_answer makes exactly one edit") {
  std::mt19937_64 rng(123);
  std::vector<std::string> answers = {"123", "7", "42195", "Paris",
                                      "mixedCase99", "ab"};
  for (const auto& answer : answers) {
    for (int iter = 0; iter < 300; ++iter) {
      std::string out = perturb_answer(answer, rng);
      CHECK(out != answer);
      CHECK(levenshtein(answer, out) == 1);
      CHECK_FALSE(out.empty());
    }
  }
  CHECK_THROWS_AS(perturb_answer("", rng), ContractError);
}

TEST_CASE("perturb_answer is seed-stable") {
  std::mt19937_64 a(99);
  std::mt19937_64 b(99);
  for (int i = 0; i < 50; ++i) {
    CHECK(perturb_answer("31415", a) == perturb_answer("31415", b));
  }
}

TEST_CASE("perturb_answer keeps character classes") {
  std::mt19937_64 rng(5);
  for (int iter = 0; iter < 500; ++iter) {
    std::string out = perturb_answer("12345", rng);
    for (char c : out) {
      CHECK(std::isdigit(static_cast<unsigned char>(c)));
    }
  }
}

TEST_CASE("noise levels map to identical-group sizes 5/10/15/20") {
  auto items = numeric_items(3);
  std::map<int, int> expected{{1, 5}, {2, 10}, {3, 15}, {4, 20}};
  for (const auto& [level, identical] : expected) {
    NoiseSpec spec;
    spec.proportion = 1.0;
    spec.level = level;
    spec.variants_per_item = 20;
    spec.seed = 7;
    auto set = synthesize_noise_set(items, spec);
    REQUIRE(set.records.size() == items.size() * 20);

    for (const auto& item : items) {
      std::map<std::string, int> counts;
      int total = 0;
      for (const auto& r : set.records) {
        if (r.id.rfind(item.id + "#", 0) == 0) {
          ++counts[r.answer];
          ++total;
          CHECK(r.noisy);
          CHECK(levenshtein(item.gold_answers[0], r.answer) == 1);
        }
      }
      CHECK(total == 20);
      int largest = 0;
      int singletons_plus = 0;
      for (const auto& [answer, c] : counts) {
        largest = std::max(largest, c);
        if (c > 1) singletons_plus += c;
      }
      CHECK(largest == identical);
      // Only the shared answer repeats; the rest are distinct.
      CHECK(singletons_plus == (identical > 1 ? identical : 0));
    }
  }
}

TEST_CASE("noise proportion selects round(p*N) items, seed-stably") {
  auto items = numeric_items(10);
  NoiseSpec spec;
  spec.proportion = 0.5;
  spec.level = 4;
  spec.variants_per_item = 20;
  spec.seed = 17;
  auto set = synthesize_noise_set(items, spec);
  int noisy_items = 0;
  int clean_items = 0;
  for (const auto& r : set.records) {
    if (!r.noisy) ++clean_items;
  }
  noisy_items = (static_cast<int>(set.records.size()) - clean_items) / 20;
  CHECK(noisy_items == 5);
  CHECK(clean_items == 5);
  CHECK(set.records.size() == 5u * 20u + 5u);

  std::string p1 = temp_file("seedstable1.jsonl");
  std::string p2 = temp_file("seedstable2.jsonl");
  save_training_records(set.records, p1);
  save_training_records(synthesize_noise_set(items, spec).records, p2);
  CHECK(util::read_file(p1) == util::read_file(p2));

  NoiseSpec other = spec;
  other.seed = 18;
  std::string p3 = temp_file("seedstable3.jsonl");
  save_training_records(synthesize_noise_set(items, other).records, p3);
  CHECK(util::read_file(p1) != util::read_file(p3));
}

TEST_CASE("level-1 granularity warning for tiny variant counts") {
  auto items = numeric_items(1);
  NoiseSpec spec;
  spec.level = 1;
  spec.variants_per_item = 3;
  auto set = synthesize_noise_set(items, spec);
  CHECK_FALSE(set.warnings.empty());
}

TEST_CASE("refusal SFT set: ratio arithmetic and labels") {
  std::vector<AuditRecord> records;
  for (int i = 0; i < 12; ++i) {
    records.push_back(graded_record("c" + std::to_string(i),
                                    Outcome::Correct, Classification::None));
  }
  for (int i = 0; i < 6; ++i) {
    records.push_back(graded_record(
        "i" + std::to_string(i), Outcome::Incorrect,
        i % 2 == 0 ? Classification::Delusion : Classification::Hallucination));
  }
  records.push_back(
      graded_record("r0", Outcome::Rejected, Classification::None));

  SftSpec spec;
  spec.refuse_ratio = 0.3;
  spec.total = 10;
  spec.seed = 3;
  auto set = build_refusal_sft_set(records, spec);
  REQUIRE(set.size() == 10);
  int refusals = 0;
  for (const auto& r : set) {
    if (r.answer == "I don't know") {
      ++refusals;
      CHECK((r.label == "delusion" || r.label == "hallucination"));
    } else {
      CHECK(r.label == "none");
      CHECK(r.answer.rfind("gold ", 0) == 0);
    }
  }
  CHECK(refusals == 3);

  SftSpec half;
  half.refuse_ratio = 0.5;
  half.total = 8;
  auto set8 = build_refusal_sft_set(records, half);
  int refusals8 = 0;
  for (const auto& r : set8) refusals8 += r.answer == "I don't know" ? 1 : 0;
  CHECK(refusals8 == 4);
}

TEST_CASE("refusal SFT set: shortfall errors name the side") {
  std::vector<AuditRecord> records;
  records.push_back(graded_record("c0", Outcome::Correct, Classification::None));
  records.push_back(graded_record("i0", Outcome::Incorrect,
                                  Classification::Hallucination));
  records.push_back(graded_record("i1", Outcome::Incorrect,
                                  Classification::Hallucination));

  SftSpec spec;
  spec.refuse_ratio = 0.75;
  spec.total = 4;  // needs 3 refusals from 2 incorrect records
  CHECK_THROWS_WITH_AS(build_refusal_sft_set(records, spec),
                       doctest::Contains("refusal pool"), DataError);

  spec.refuse_ratio = 0.25;
  spec.total = 4;  // needs 3 answers from 1 correct record
  CHECK_THROWS_WITH_AS(build_refusal_sft_set(records, spec),
                       doctest::Contains("answer pool"), DataError);
}

TEST_CASE("training records round-trip through JSONL") {
  std::vector<TrainingRecord> records = {
      {"a#0", "what?", "that", "", true},
      {"b", "why, with \"quotes\"?", "because\nso", "delusion", false},
  };
  std::string path = temp_file("train.jsonl");
  save_training_records(records, path);
  auto loaded = load_training_records(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].id == "a#0");
  CHECK(loaded[0].noisy);
  CHECK(loaded[1].question == records[1].question);
  CHECK(loaded[1].answer == records[1].answer);
  CHECK(loaded[1].label == "delusion");
  // No header line: consumable as plain chat-format JSONL.
  CHECK(util::read_file(path).rfind("{\"id\"", 0) == 0);
}

TEST_CASE("cosine_similarity basics") {
  EmbeddingVector a{{1.0, 0.0}};
  EmbeddingVector b{{1.0, 0.0}};
  CHECK(cosine_similarity(a, b) == 1.0);
  CHECK(cosine_similarity(a, EmbeddingVector{{0.0, 1.0}}) == 0.0);
  CHECK(cosine_similarity(a, EmbeddingVector{{-1.0, 0.0}}) == -1.0);
  CHECK_THROWS_AS(cosine_similarity(a, EmbeddingVector{{1.0, 0.0, 0.0}}),
                  ContractError);
  CHECK_THROWS_AS(cosine_similarity(a, EmbeddingVector{{0.0, 0.0}}),
                  ContractError);
}

TEST_CASE("trigram embedder: deterministic, near-orthogonal on disjoint text") {
  TrigramMockEmbedder embedder;
  auto v = embedder.embed({"abc", "abc"});
  CHECK(cosine_similarity(v[0], v[1]) == 1.0);

  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 40; ++iter) {
    // Short texts over disjoint alphabets share no trigram.
    std::string left;
    std::string right;
    int len = 5 + static_cast<int>(util::bounded(rng, 3));
    for (int i = 0; i < len; ++i) {
      left.push_back(static_cast<char>('a' + util::bounded(rng, 6)));
      right.push_back(static_cast<char>('t' + util::bounded(rng, 6)));
    }
    auto pair = embedder.embed({left, right});
    CHECK(cosine_similarity(pair[0], pair[1]) < 0.1);
  }

  CHECK_THROWS_AS(embedder.embed({}), ContractError);
}

TEST_CASE("dedup_refine: answer match, similarity threshold, idempotence") {
  TrigramMockEmbedder embedder;
  std::vector<DelusionExample> delusions = {
      {"d1", "How many moons does Zorblax have?", "17"}};

  std::vector<TrainingRecord> records = {
      {"t1", "When did the empire of Quux fall?", "17", "", false},
      {"t2", "How many moons does Zorblax have today?", "9941", "", false},
      {"t3", "Completely unrelated question entirely?", "42", "", false},
  };

  auto result = dedup_refine(records, delusions, embedder);
  // t1 shares the canonical answer, t2's question is nearly identical.
  REQUIRE(result.removed.size() == 2);
  CHECK(result.removed[0].record_id == "t1");
  CHECK(result.removed[0].trigger == "answer-match");
  CHECK(result.removed[1].record_id == "t2");
  CHECK(result.removed[1].trigger == "similarity");
  CHECK(result.removed[1].similarity > 0.9);
  REQUIRE(result.kept.size() == 1);
  CHECK(result.kept[0].id == "t3");

  auto again = dedup_refine(result.kept, delusions, embedder);
  CHECK(again.removed.empty());
  CHECK(again.kept.size() == result.kept.size());

  CHECK_THROWS_AS(dedup_refine(records, {}, embedder), ContractError);
}

TEST_CASE("dedup_refine: similarity exactly at the threshold is kept") {
  // Planted embedder: cosine(q_record, q_delusion) == 81/(9*10) == 0.9.
  class PlantedEmbedder : public Embedder {
   public:
    std::vector<EmbeddingVector> embed(
        const std::vector<std::string>& texts) override {
      std::vector<EmbeddingVector> out;
      for (const auto& t : texts) {
        EmbeddingVector v;
        v.values.assign(84, 0.0);
        if (t == "record question") {
          for (int i = 0; i < 81; ++i) v.values[i] = 1.0;
        } else {
          for (int i = 0; i < 81; ++i) v.values[i] = 1.0;
          v.values[81] = 3.0;
          v.values[82] = 3.0;
          v.values[83] = 1.0;
        }
        out.push_back(std::move(v));
      }
      return out;
    }
  } planted;

  std::vector<TrainingRecord> records = {
      {"t1", "record question", "clean answer", "", false}};
  std::vector<DelusionExample> delusions = {
      {"d1", "delusion question", "other answer"}};

  auto at_limit = dedup_refine(records, delusions, planted,
                               DedupOptions{0.9, false});
  CHECK(at_limit.removed.empty());
  CHECK(at_limit.kept.size() == 1);

  auto below = dedup_refine(records, delusions, planted,
                            DedupOptions{0.89, false});
  CHECK(below.removed.size() == 1);
  CHECK(below.removed[0].similarity == 0.9);
}

TEST_CASE("removal report CSV shape") {
  std::vector<DedupRemoval> removals = {
      {"r1", "answer-match", "d1", 0.42},
      {"r,2", "similarity", "d2", 0.95},
  };
  std::string path = temp_file("removals.csv");
  write_removal_report_csv(path, removals);
  std::string csv = util::read_file(path);
  CHECK(csv.rfind("record_id,trigger,matched_delusion_id,similarity\n", 0) ==
        0);
  CHECK(csv.find("r1,answer-match,d1,0.42") != std::string::npos);
  CHECK(csv.find("\"r,2\",similarity,d2,0.95") != std::string::npos);
}
