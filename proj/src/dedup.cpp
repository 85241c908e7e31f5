#include "delaudit/dedup.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "delaudit/errors.hpp"
#include "delaudit/grading.hpp"
#include "delaudit/records.hpp"
#include "delaudit/util.hpp"

namespace delaudit::noise {

using nlohmann::json;

DedupResult dedup_refine(const std::vector<TrainingRecord>& records,
                         const std::vector<DelusionExample>& delusions,
                         Embedder& embedder, const DedupOptions& opts) {
  if (delusions.empty()) {
    throw ContractError("dedup_refine: delusion example list is empty");
  }
  DedupResult result;
  if (records.empty()) return result;

  std::vector<std::string> record_texts;
  record_texts.reserve(records.size());
  for (const auto& r : records) {
    record_texts.push_back(opts.embed_qa ? r.question + "\n" + r.answer
                                         : r.question);
  }
  std::vector<std::string> delusion_texts;
  delusion_texts.reserve(delusions.size());
  for (const auto& d : delusions) {
    delusion_texts.push_back(opts.embed_qa ? d.question + "\n" + d.answer
                                           : d.question);
  }
  auto record_vecs = embedder.embed(record_texts);
  auto delusion_vecs = embedder.embed(delusion_texts);

  std::vector<std::string> delusion_answers;
  delusion_answers.reserve(delusions.size());
  for (const auto& d : delusions) {
    delusion_answers.push_back(grading::canonical_form(d.answer));
  }

  for (std::size_t i = 0; i < records.size(); ++i) {
    std::string canon_answer = grading::canonical_form(records[i].answer);
    bool removed = false;
    for (std::size_t d = 0; d < delusions.size() && !removed; ++d) {
      if (canon_answer == delusion_answers[d]) {
        result.removed.push_back(DedupRemoval{
            records[i].id, "answer-match", delusions[d].id,
            cosine_similarity(record_vecs[i], delusion_vecs[d])});
        removed = true;
      }
    }
    for (std::size_t d = 0; d < delusions.size() && !removed; ++d) {
      double sim = cosine_similarity(record_vecs[i], delusion_vecs[d]);
      if (sim > opts.sim_threshold) {
        result.removed.push_back(
            DedupRemoval{records[i].id, "similarity", delusions[d].id, sim});
        removed = true;
      }
    }
    if (!removed) result.kept.push_back(records[i]);
  }
  return result;
}

namespace {

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

void write_removal_report_csv(const std::string& path,
                              const std::vector<DedupRemoval>& removals) {
  std::ostringstream out;
  out << "record_id,trigger,matched_delusion_id,similarity\n";
  for (const auto& r : removals) {
    out << csv_escape(r.record_id) << ',' << r.trigger << ','
        << csv_escape(r.matched_delusion_id) << ','
        << json(r.similarity).dump() << '\n';
  }
  util::write_file(path, out.str());
}

std::vector<DelusionExample> load_delusion_examples(const std::string& path) {
  std::ifstream probe(path);
  if (!probe) throw DataError("cannot open delusion examples: " + path);
  std::string first_line;
  std::getline(probe, first_line);
  probe.close();

  bool is_record_file = false;
  try {
    json header = json::parse(first_line);
    is_record_file = header.is_object() &&
                     header.value("format", "") == core::kRecordFormatName;
  } catch (const json::exception&) {
    throw DataError(path + ": first line is not JSON");
  }

  std::vector<DelusionExample> out;
  if (is_record_file) {
    for (const auto& r : core::load_records(path)) {
      if (r.verdict.classification == Classification::Delusion) {
        out.push_back(DelusionExample{r.item.id, r.item.question,
                                      r.item.gold_answers.at(0)});
      }
    }
  } else {
    std::ifstream in(path);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (util::trim(line).empty()) continue;
      try {
        json j = json::parse(line);
        out.push_back(DelusionExample{j.at("id").get<std::string>(),
                                      j.at("question").get<std::string>(),
                                      j.at("answer").get<std::string>()});
      } catch (const json::exception& e) {
        throw DataError(path + ":" + std::to_string(line_no) +
                        ": bad delusion example: " + e.what());
      }
    }
  }
  if (out.empty()) {
    throw DataError(path + ": no delusion examples found");
  }
  return out;
}

}  // namespace delaudit::noise
