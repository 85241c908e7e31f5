#pragma once

#include <map>
#include <string>
#include <vector>

#include "delaudit/types.hpp"

namespace delaudit::prompts {

enum class TemplateId {
  Logits,
  PTrue,
  Consistency,
  Verb1S,
  Verb2S,
  HonestyCanRefuse,
  HonestyLessRefuse,
  HonestyMoreRefuse,
  HonestyMediumRefuse,
  HonestyHighRefuse,
  HonestyMostRefuse,
  Reflection,
  Rag,
};

inline constexpr std::array<TemplateId, 13> kAllTemplates = {
    TemplateId::Logits,          TemplateId::PTrue,
    TemplateId::Consistency,     TemplateId::Verb1S,
    TemplateId::Verb2S,          TemplateId::HonestyCanRefuse,
    TemplateId::HonestyLessRefuse, TemplateId::HonestyMoreRefuse,
    TemplateId::HonestyMediumRefuse, TemplateId::HonestyHighRefuse,
    TemplateId::HonestyMostRefuse, TemplateId::Reflection,
    TemplateId::Rag,
};

/// Name used in file names, dry-run dumps and honesty tags.
std::string_view template_name(TemplateId id);

struct PromptTemplate {
  std::string name;
  std::string system_text;
  std::string user_template;

  /// System plus user message with {placeholder} substitution. Unknown
  /// placeholders are left intact.
  std::vector<Message> render(
      const std::map<std::string, std::string>& vars) const;
};

/// Loads the template files under <share_dir>/prompts and validates that
/// each template carries exactly the placeholders it is supposed to.
class PromptLibrary {
 public:
  static PromptLibrary load(const std::string& share_dir);

  /// DELAUDIT_SHARE env var if set, else the compiled-in share directory.
  static std::string default_share_dir();

  const PromptTemplate& get(TemplateId id) const;

  /// Template used to elicit the scored artifact of a method. Agreement
  /// uses the consistency prompt; raw_logits uses the plain answer prompt.
  const PromptTemplate& estimator(Method m) const;

  /// The six honesty prompts in battery order, tagged helpful_*_refuse.
  std::vector<std::pair<std::string, const PromptTemplate*>> honesty_battery()
      const;

  /// Dry-run dump: "=== name ===" header followed by the template file
  /// contents, for each id in order.
  std::string dump(const std::vector<TemplateId>& ids) const;

 private:
  std::map<TemplateId, PromptTemplate> templates_;
};

/// Formats retrieval passages as numbered documents separated by blank
/// lines: "Document 1:\n<text>\n\nDocument 2:\n..."
std::string render_passages_block(const std::vector<std::string>& passages);

}  // namespace delaudit::prompts
