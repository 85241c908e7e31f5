#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace delaudit::util {

/// FNV-1a 64-bit hash. Stable across platforms and builds; used for prompt
/// fingerprints and per-item seed derivation.
std::uint64_t fnv1a64(std::string_view data);

/// Current time as "YYYY-MM-DDTHH:MM:SSZ".
std::string utc_now_iso8601();

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split_ws(std::string_view s);

/// True when `s` starts with `prefix` ignoring ASCII case.
bool istarts_with(std::string_view s, std::string_view prefix);

/// Unbiased draw from [0, n). n must be > 0.
std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n);

/// Deterministic Fisher-Yates shuffle driven by `bounded`.
template <typename T>
void shuffle_vec(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

}  // namespace delaudit::util
