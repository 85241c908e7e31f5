#include "delaudit/noise.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "delaudit/errors.hpp"
#include "delaudit/util.hpp"

namespace delaudit::noise {

using nlohmann::json;

namespace {

constexpr const char* kTrainingSystemText = "You are a helpful assistant.";
constexpr int kMaxDistinctAttempts = 10000;

std::string_view char_class_pool(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  if (std::isdigit(u)) return "0123456789";
  if (std::isupper(u)) return "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  return "abcdefghijklmnopqrstuvwxyz";
}

char draw_from_pool(std::string_view pool, std::mt19937_64& rng) {
  return pool[util::bounded(rng, pool.size())];
}

}  // namespace

double NoiseSpec::identical_fraction() const {
  switch (level) {
    case 1: return 0.25;
    case 2: return 0.50;
    case 3: return 0.75;
    case 4: return 1.00;
  }
  throw ConfigError("noise level must be in 1..4");
}

void NoiseSpec::validate() const {
  if (proportion < 0.0 || proportion > 1.0) {
    throw ConfigError("noise proportion must be in [0,1]");
  }
  if (level < 1 || level > 4) throw ConfigError("noise level must be in 1..4");
  if (variants_per_item < 1) {
    throw ConfigError("variants_per_item must be >= 1");
  }
}

std::string perturb_answer(std::string_view answer, std::mt19937_64& rng) {
  if (answer.empty()) {
    throw ContractError("perturb_answer: answer must be non-empty");
  }
  std::string out(answer);
  // 0 = insert, 1 = delete, 2 = replace; single-character answers never
  // delete.
  int op;
  if (answer.size() == 1) {
    op = util::bounded(rng, 2) == 0 ? 0 : 2;
  } else {
    op = static_cast<int>(util::bounded(rng, 3));
  }
  switch (op) {
    case 0: {
      std::size_t pos = util::bounded(rng, answer.size() + 1);
      char neighbor = pos < answer.size() ? answer[pos] : answer.back();
      out.insert(out.begin() + static_cast<std::ptrdiff_t>(pos),
                 draw_from_pool(char_class_pool(neighbor), rng));
      break;
    }
    case 1: {
      std::size_t pos = util::bounded(rng, answer.size());
      out.erase(out.begin() + static_cast<std::ptrdiff_t>(pos));
      break;
    }
    default: {
      std::size_t pos = util::bounded(rng, answer.size());
      std::string_view pool = char_class_pool(answer[pos]);
      char replacement;
      do {
        replacement = draw_from_pool(pool, rng);
      } while (replacement == answer[pos]);
      out[pos] = replacement;
      break;
    }
  }
  return out;
}

NoiseSet synthesize_noise_set(const std::vector<QAItem>& items,
                              const NoiseSpec& spec) {
  spec.validate();
  NoiseSet out;
  if (items.empty()) return out;

  if (spec.level == 1 && spec.variants_per_item < 4) {
    out.warnings.push_back(
        "variants_per_item < 4 at level 1: identical fraction rounds "
        "coarsely");
  }

  std::size_t n_noisy = static_cast<std::size_t>(
      std::llround(spec.proportion * static_cast<double>(items.size())));
  std::vector<std::size_t> order(items.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 selection_rng(spec.seed);
  util::shuffle_vec(order, selection_rng);
  std::set<std::size_t> noisy_idx(order.begin(),
                                  order.begin() + static_cast<std::ptrdiff_t>(
                                                      n_noisy));

  int identical = static_cast<int>(std::ceil(
      spec.identical_fraction() * static_cast<double>(spec.variants_per_item)));

  for (std::size_t i = 0; i < items.size(); ++i) {
    const QAItem& item = items[i];
    const std::string& clean = item.gold_answers.at(0);
    if (clean.empty()) {
      throw DataError("item " + item.id + " has an empty first gold answer");
    }
    if (noisy_idx.count(i) == 0) {
      out.records.push_back(
          TrainingRecord{item.id, item.question, clean, "", false});
      continue;
    }

    std::mt19937_64 rng(spec.seed ^ util::fnv1a64(item.id));
    std::string shared = perturb_answer(clean, rng);
    std::set<std::string> used{shared};
    std::vector<std::string> variants(static_cast<std::size_t>(identical),
                                      shared);
    while (variants.size() < static_cast<std::size_t>(spec.variants_per_item)) {
      std::string candidate;
      int attempts = 0;
      do {
        candidate = perturb_answer(clean, rng);
        if (++attempts > kMaxDistinctAttempts) {
          throw DataError("item " + item.id +
                          ": cannot draw enough distinct perturbations");
        }
      } while (used.count(candidate) != 0);
      used.insert(candidate);
      variants.push_back(std::move(candidate));
    }
    for (std::size_t k = 0; k < variants.size(); ++k) {
      out.records.push_back(TrainingRecord{
          item.id + "#" + std::to_string(k), item.question, variants[k], "",
          true});
    }
  }
  return out;
}

std::vector<TrainingRecord> build_refusal_sft_set(
    const std::vector<AuditRecord>& records, const SftSpec& spec) {
  if (spec.refuse_ratio <= 0.0 || spec.refuse_ratio >= 1.0) {
    throw ConfigError("refuse_ratio must be in (0,1)");
  }
  if (spec.total < 1) throw ConfigError("total must be >= 1");

  std::vector<const AuditRecord*> incorrect;
  std::vector<const AuditRecord*> correct;
  for (const auto& r : records) {
    if (r.verdict.outcome == Outcome::Incorrect) incorrect.push_back(&r);
    if (r.verdict.outcome == Outcome::Correct) correct.push_back(&r);
  }

  int n_refuse = static_cast<int>(
      std::llround(spec.refuse_ratio * static_cast<double>(spec.total)));
  int n_answer = spec.total - n_refuse;
  if (static_cast<int>(incorrect.size()) < n_refuse) {
    throw DataError("refusal pool too small: need " +
                    std::to_string(n_refuse) + " incorrect records, have " +
                    std::to_string(incorrect.size()));
  }
  if (static_cast<int>(correct.size()) < n_answer) {
    throw DataError("answer pool too small: need " + std::to_string(n_answer) +
                    " correct records, have " +
                    std::to_string(correct.size()));
  }

  std::mt19937_64 rng(spec.seed);
  util::shuffle_vec(incorrect, rng);
  util::shuffle_vec(correct, rng);

  std::vector<TrainingRecord> out;
  out.reserve(static_cast<std::size_t>(spec.total));
  for (int i = 0; i < n_refuse; ++i) {
    const AuditRecord& r = *incorrect[static_cast<std::size_t>(i)];
    out.push_back(TrainingRecord{
        r.item.id, r.item.question, spec.refusal_text,
        std::string(to_string(r.verdict.classification)), false});
  }
  for (int i = 0; i < n_answer; ++i) {
    const AuditRecord& r = *correct[static_cast<std::size_t>(i)];
    out.push_back(TrainingRecord{
        r.item.id, r.item.question, r.item.gold_answers.at(0),
        std::string(to_string(r.verdict.classification)), false});
  }
  return out;
}

void save_training_records(const std::vector<TrainingRecord>& records,
                           const std::string& path) {
  std::string bytes;
  for (const auto& r : records) {
    json messages = json::array(
        {json{{"role", "system"}, {"content", kTrainingSystemText}},
         json{{"role", "user"}, {"content", r.question}},
         json{{"role", "assistant"}, {"content", r.answer}}});
    json j{{"id", r.id},
           {"label", r.label},
           {"noisy", r.noisy},
           {"messages", messages}};
    bytes += j.dump();
    bytes.push_back('\n');
  }
  util::write_file(path, bytes);
}

std::vector<TrainingRecord> load_training_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open training file: " + path);
  std::vector<TrainingRecord> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    try {
      json j = json::parse(line);
      TrainingRecord r;
      j.at("id").get_to(r.id);
      r.label = j.value("label", "");
      r.noisy = j.value("noisy", false);
      for (const auto& m : j.at("messages")) {
        std::string role = m.at("role").get<std::string>();
        if (role == "user") r.question = m.at("content").get<std::string>();
        if (role == "assistant") r.answer = m.at("content").get<std::string>();
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": bad training record: " + e.what());
    }
  }
  return out;
}

}  // namespace delaudit::noise
