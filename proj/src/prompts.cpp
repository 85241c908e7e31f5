#include "delaudit/prompts.hpp"

#include <cstdlib>
#include <set>

#include "delaudit/errors.hpp"
#include "delaudit/util.hpp"

#ifndef DELAUDIT_DEFAULT_SHARE_DIR
#define DELAUDIT_DEFAULT_SHARE_DIR "share"
#endif

namespace delaudit::prompts {

std::string_view template_name(TemplateId id) {
  switch (id) {
    case TemplateId::Logits: return "logits";
    case TemplateId::PTrue: return "p_true";
    case TemplateId::Consistency: return "consistency";
    case TemplateId::Verb1S: return "verb_1s";
    case TemplateId::Verb2S: return "verb_2s";
    case TemplateId::HonestyCanRefuse: return "helpful_can_refuse";
    case TemplateId::HonestyLessRefuse: return "helpful_less_refuse";
    case TemplateId::HonestyMoreRefuse: return "helpful_more_refuse";
    case TemplateId::HonestyMediumRefuse: return "helpful_medium_refuse";
    case TemplateId::HonestyHighRefuse: return "helpful_high_refuse";
    case TemplateId::HonestyMostRefuse: return "helpful_most_refuse";
    case TemplateId::Reflection: return "reflection";
    case TemplateId::Rag: return "rag";
  }
  throw ContractError("unknown TemplateId");
}

namespace {

std::string file_name(TemplateId id) {
  switch (id) {
    case TemplateId::HonestyCanRefuse: return "honesty_helpful_can_refuse.txt";
    case TemplateId::HonestyLessRefuse:
      return "honesty_helpful_less_refuse.txt";
    case TemplateId::HonestyMoreRefuse:
      return "honesty_helpful_more_refuse.txt";
    case TemplateId::HonestyMediumRefuse:
      return "honesty_helpful_medium_refuse.txt";
    case TemplateId::HonestyHighRefuse:
      return "honesty_helpful_high_refuse.txt";
    case TemplateId::HonestyMostRefuse:
      return "honesty_helpful_most_refuse.txt";
    default: return std::string(template_name(id)) + ".txt";
  }
}

/// Placeholders each template must carry (and no others).
std::set<std::string> expected_placeholders(TemplateId id) {
  switch (id) {
    case TemplateId::PTrue: return {"{question}", "{answer}"};
    case TemplateId::Verb2S: return {"{question}", "{previous_answer}"};
    case TemplateId::Reflection: return {"{question}", "{previous_answer}"};
    case TemplateId::Rag: return {"{question}", "{passages}"};
    default: return {"{question}"};
  }
}

const std::set<std::string>& known_placeholders() {
  static const std::set<std::string> known = {
      "{question}", "{answer}", "{previous_answer}", "{passages}"};
  return known;
}

PromptTemplate parse_template_file(const std::string& path,
                                   const std::string& name) {
  std::string contents = util::read_file(path);
  PromptTemplate tmpl;
  tmpl.name = name;

  std::string* section = nullptr;
  std::vector<std::string> system_lines;
  std::vector<std::string> user_lines;
  std::vector<std::string>* lines = nullptr;
  std::size_t pos = 0;
  while (pos <= contents.size()) {
    std::size_t nl = contents.find('\n', pos);
    std::string line = nl == std::string::npos
                           ? contents.substr(pos)
                           : contents.substr(pos, nl - pos);
    if (line == "[system]") {
      lines = &system_lines;
    } else if (line == "[user]") {
      lines = &user_lines;
    } else if (lines != nullptr) {
      lines->push_back(line);
    } else if (!line.empty()) {
      throw DataError(path + ": text before [system] marker");
    }
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
  (void)section;

  auto join = [](std::vector<std::string>& ls) {
    // The final newline of the file (or before the next marker) belongs to
    // the file format, not the text.
    while (!ls.empty() && ls.back().empty()) ls.pop_back();
    std::string out;
    for (std::size_t i = 0; i < ls.size(); ++i) {
      if (i > 0) out.push_back('\n');
      out += ls[i];
    }
    return out;
  };
  tmpl.system_text = join(system_lines);
  tmpl.user_template = join(user_lines);
  if (tmpl.system_text.empty() || tmpl.user_template.empty()) {
    throw DataError(path + ": template needs [system] and [user] sections");
  }
  return tmpl;
}

}  // namespace

std::vector<Message> PromptTemplate::render(
    const std::map<std::string, std::string>& vars) const {
  std::string user = user_template;
  for (const auto& [key, value] : vars) {
    std::string placeholder = "{" + key + "}";
    std::size_t pos = 0;
    while ((pos = user.find(placeholder, pos)) != std::string::npos) {
      user.replace(pos, placeholder.size(), value);
      pos += value.size();
    }
  }
  return {Message{"system", system_text}, Message{"user", user}};
}

PromptLibrary PromptLibrary::load(const std::string& share_dir) {
  PromptLibrary lib;
  for (TemplateId id : kAllTemplates) {
    std::string path = share_dir + "/prompts/" + file_name(id);
    PromptTemplate tmpl =
        parse_template_file(path, std::string(template_name(id)));

    std::string full = tmpl.system_text + "\n" + tmpl.user_template;
    auto expected = expected_placeholders(id);
    for (const auto& ph : known_placeholders()) {
      bool present = full.find(ph) != std::string::npos;
      bool wanted = expected.count(ph) != 0;
      if (present != wanted) {
        throw DataError(path + ": placeholder " + ph +
                        (wanted ? " missing" : " unexpected"));
      }
    }
    lib.templates_.emplace(id, std::move(tmpl));
  }
  return lib;
}

std::string PromptLibrary::default_share_dir() {
  if (const char* env = std::getenv("DELAUDIT_SHARE");
      env != nullptr && *env != '\0') {
    return env;
  }
  return DELAUDIT_DEFAULT_SHARE_DIR;
}

const PromptTemplate& PromptLibrary::get(TemplateId id) const {
  auto it = templates_.find(id);
  if (it == templates_.end()) throw ContractError("template not loaded");
  return it->second;
}

const PromptTemplate& PromptLibrary::estimator(Method m) const {
  switch (m) {
    case Method::RawLogits: return get(TemplateId::Logits);
    case Method::Agreement: return get(TemplateId::Consistency);
    case Method::PTrue: return get(TemplateId::PTrue);
    case Method::Verb1S: return get(TemplateId::Verb1S);
    case Method::Verb2S: return get(TemplateId::Verb2S);
  }
  throw ContractError("unknown Method");
}

std::vector<std::pair<std::string, const PromptTemplate*>>
PromptLibrary::honesty_battery() const {
  std::vector<std::pair<std::string, const PromptTemplate*>> out;
  for (TemplateId id :
       {TemplateId::HonestyCanRefuse, TemplateId::HonestyLessRefuse,
        TemplateId::HonestyMoreRefuse, TemplateId::HonestyMediumRefuse,
        TemplateId::HonestyHighRefuse, TemplateId::HonestyMostRefuse}) {
    out.emplace_back(std::string(template_name(id)), &get(id));
  }
  return out;
}

std::string PromptLibrary::dump(const std::vector<TemplateId>& ids) const {
  std::string out;
  for (TemplateId id : ids) {
    const PromptTemplate& t = get(id);
    out += "=== ";
    out += template_name(id);
    out += " ===\n[system]\n";
    out += t.system_text;
    out += "\n[user]\n";
    out += t.user_template;
    out += "\n";
  }
  return out;
}

std::string render_passages_block(const std::vector<std::string>& passages) {
  std::string out;
  for (std::size_t i = 0; i < passages.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += "Document " + std::to_string(i + 1) + ":\n" + passages[i];
  }
  return out;
}

}  // namespace delaudit::prompts
