#pragma once

#include <string>
#include <vector>

#include "delaudit/types.hpp"

namespace delaudit::core {

inline constexpr int kRecordFormatVersion = 1;
inline constexpr const char* kRecordFormatName = "delaudit.records";

/// Serializes records as line-delimited JSON with a one-line header object
/// carrying the format name and version. save -> load -> save is
/// byte-identical for any valid record set.
void save_records(const std::vector<AuditRecord>& records,
                  const std::string& path);

/// Loads a record file, checking the header version and the stored
/// invariants (rejected records carry no classification, raw scores in
/// [0,1]). Throws DataError on violations.
std::vector<AuditRecord> load_records(const std::string& path);

/// The exact bytes save_records would write. Exposed for byte-stability
/// tests and in-memory round trips.
std::string records_to_bytes(const std::vector<AuditRecord>& records);

/// Validates cross-field invariants of one record; throws DataError.
void validate_record(const AuditRecord& record);

inline constexpr const char* kTraceFormatName = "delaudit.traces";

/// Bare trace files used by protocol runs (honesty, reflection). Same
/// header convention as record files.
void save_traces(const std::vector<GenerationTrace>& traces,
                 const std::string& path);
std::vector<GenerationTrace> load_traces(const std::string& path);

}  // namespace delaudit::core
