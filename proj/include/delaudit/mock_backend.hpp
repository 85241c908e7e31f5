#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "delaudit/client.hpp"

namespace delaudit::client {

/// Stable fingerprint of a prompt: FNV-1a over role/text pairs.
std::uint64_t prompt_fingerprint(const std::vector<Message>& messages);

/// Deterministic in-process backend driven by a JSON script.
///
/// Script format:
///   {
///     "default_behavior": "error" | "echo",
///     "default_token_logprob": -0.1,
///     "entries": [
///       {
///         "name": "optional label",
///         "mode": "any" | "greedy" | "sampled",
///         "match": ["substring", ...],              // all must occur in the
///                                                   // concatenated prompt
///         "messages": [["system","..."], ...],      // exact alternative;
///                                                   // matched by fingerprint
///         "completions": [
///           "Paris",                                // shorthand: text only
///           {"text": "Paris",
///            "logprobs": [["Par", -0.1, [["Par",-0.1],["Lon",-3.0]]]],
///            "no_logprobs": false,
///            "token_logprob": -0.1},
///         ],
///         "fail_first": 0,          // transient failures before success
///         "error_always": false,    // permanent failure
///         "delay_ms": 0
///       }
///     ]
///   }
///
/// Greedy requests always take completion 0; sampled requests cycle through
/// the list under a mutex, so a fixed request sequence yields a fixed output
/// sequence. Completions without explicit logprobs get per-token logprobs
/// synthesized so the tokens concatenate exactly to the output text.
class MockBackend : public ChatBackend {
 public:
  static std::unique_ptr<MockBackend> from_file(const std::string& path);
  static std::unique_ptr<MockBackend> from_json(const nlohmann::json& script);

  std::vector<Completion> complete(const ChatRequest& request) override;

  /// Pinned so identical runs produce byte-identical traces.
  std::string timestamp() const override { return "1970-01-01T00:00:00Z"; }

  int total_calls() const;
  int max_in_flight() const;

 private:
  struct ScriptedCompletion {
    std::string text;
    std::vector<TokenLogprob> logprobs;
    bool explicit_logprobs = false;
    bool no_logprobs = false;
    double token_logprob = 0.0;
    bool has_token_logprob = false;
  };
  struct Entry {
    std::string name;
    std::string mode = "any";  // any | greedy | sampled
    std::vector<std::string> match;
    std::optional<std::uint64_t> fingerprint;
    std::vector<ScriptedCompletion> completions;
    int fail_first = 0;
    bool error_always = false;
    int delay_ms = 0;
    // Mutable call state, guarded by mu_.
    int failures_served = 0;
    std::size_t cursor = 0;
  };

  Completion materialize(const Entry& entry, const ScriptedCompletion& c,
                         const ChatRequest& request) const;
  Entry* find_entry(const ChatRequest& request);

  std::string default_behavior_ = "error";
  double default_token_logprob_ = -0.1;
  std::vector<Entry> entries_;

  mutable std::mutex mu_;
  int total_calls_ = 0;
  int in_flight_ = 0;
  int max_in_flight_ = 0;
};

}  // namespace delaudit::client
