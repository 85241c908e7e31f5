#pragma once

#include <string>
#include <vector>

#include "delaudit/types.hpp"

namespace delaudit::core {

/// Loads a JSONL dataset. Each line is an object:
///   {"id": str, "question": str, "answers": [str, ...],
///    "passages": [str, ...]?, "source": str?}
/// Items are returned in file order. Malformed lines and duplicate ids
/// raise DataError naming the offending line number(s).
std::vector<QAItem> load_dataset(const std::string& path);

}  // namespace delaudit::core
