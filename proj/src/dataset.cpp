#include "delaudit/dataset.hpp"

#include <fstream>
#include <map>

#include <json.hpp>

#include "delaudit/errors.hpp"
#include "delaudit/util.hpp"

namespace delaudit::core {

using nlohmann::json;

std::vector<QAItem> load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset: " + path);

  std::vector<QAItem> items;
  std::map<std::string, int> seen;  // id -> line number
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;

    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": malformed JSON: " + e.what());
    }
    if (!j.is_object()) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": expected a JSON object");
    }

    QAItem item;
    try {
      j.at("id").get_to(item.id);
      j.at("question").get_to(item.question);
      j.at("answers").get_to(item.gold_answers);
      if (j.contains("passages") && !j.at("passages").is_null()) {
        item.passages = j.at("passages").get<std::vector<std::string>>();
      }
      if (j.contains("source") && !j.at("source").is_null()) {
        j.at("source").get_to(item.source);
      }
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": bad item: " + e.what());
    }

    if (item.id.empty()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": empty id");
    }
    bool any_nonempty = false;
    for (const auto& a : item.gold_answers) {
      if (!util::trim(a).empty()) any_nonempty = true;
    }
    if (!any_nonempty) {
      throw DataError(path + ":" + std::to_string(line_no) + ": item \"" +
                      item.id + "\" has no non-empty answer");
    }

    auto [it, inserted] = seen.emplace(item.id, line_no);
    if (!inserted) {
      throw DataError(path + ": duplicate id \"" + item.id + "\" at lines " +
                      std::to_string(it->second) + " and " +
                      std::to_string(line_no));
    }
    items.push_back(std::move(item));
  }
  return items;
}

}  // namespace delaudit::core
