#include "delaudit/records.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "delaudit/errors.hpp"
#include "delaudit/json_io.hpp"
#include "delaudit/util.hpp"

namespace delaudit::core {

using nlohmann::json;

void validate_record(const AuditRecord& record) {
  const std::string& id = record.item.id;
  if (record.verdict.outcome == Outcome::Rejected &&
      record.verdict.classification != Classification::None) {
    throw DataError("record " + id +
                    ": rejected outcome cannot carry a classification");
  }
  if (record.verdict.outcome == Outcome::Correct &&
      record.verdict.classification != Classification::None) {
    throw DataError("record " + id +
                    ": correct outcome cannot carry a classification");
  }
  for (const auto& [m, v] : record.belief.raw) {
    if (v < 0.0 || v > 1.0) {
      throw DataError("record " + id + ": raw belief for " +
                      std::string(to_string(m)) + " out of [0,1]");
    }
    if (record.belief.parse_failed.count(m) != 0) {
      throw DataError("record " + id + ": method " +
                      std::string(to_string(m)) +
                      " is both scored and parse_failed");
    }
  }
  for (const auto& trace : record.traces) {
    for (const auto& tl : trace.token_logprobs) {
      if (tl.logprob > 0.0) {
        throw DataError("record " + id + ": positive logprob in trace");
      }
    }
  }
}

std::string records_to_bytes(const std::vector<AuditRecord>& records) {
  std::ostringstream out;
  json header{{"format", kRecordFormatName}, {"version", kRecordFormatVersion}};
  out << header.dump() << '\n';
  for (const auto& r : records) {
    validate_record(r);
    out << json(r).dump() << '\n';
  }
  return out.str();
}

void save_records(const std::vector<AuditRecord>& records,
                  const std::string& path) {
  util::write_file(path, records_to_bytes(records));
}

void save_traces(const std::vector<GenerationTrace>& traces,
                 const std::string& path) {
  std::ostringstream out;
  json header{{"format", kTraceFormatName}, {"version", kRecordFormatVersion}};
  out << header.dump() << '\n';
  for (const auto& t : traces) out << json(t).dump() << '\n';
  util::write_file(path, out.str());
}

std::vector<GenerationTrace> load_traces(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open trace file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError("trace file is empty: " + path);
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(path + ": malformed header: " + e.what());
  }
  if (!header.is_object() || header.value("format", "") != kTraceFormatName ||
      header.value("version", -1) != kRecordFormatVersion) {
    throw DataError(path + ": not a supported trace file");
  }
  std::vector<GenerationTrace> traces;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    try {
      traces.push_back(json::parse(line).get<GenerationTrace>());
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": bad trace: " + e.what());
    }
  }
  return traces;
}

std::vector<AuditRecord> load_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open record file: " + path);
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("record file is empty (missing header): " + path);
  }
  json header;
  try {
    header = json::parse(line);
  } catch (const json::exception& e) {
    throw DataError(path + ": malformed header: " + e.what());
  }
  if (!header.is_object() ||
      header.value("format", "") != kRecordFormatName) {
    throw DataError(path + ": not a " + std::string(kRecordFormatName) +
                    " file");
  }
  int version = header.value("version", -1);
  if (version != kRecordFormatVersion) {
    throw DataError(path + ": unsupported record format version " +
                    std::to_string(version) + " (expected " +
                    std::to_string(kRecordFormatVersion) + ")");
  }

  std::vector<AuditRecord> records;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (util::trim(line).empty()) continue;
    try {
      AuditRecord r = json::parse(line).get<AuditRecord>();
      validate_record(r);
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) +
                      ": bad record: " + e.what());
    }
  }
  return records;
}

}  // namespace delaudit::core
