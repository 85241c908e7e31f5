#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "delaudit/types.hpp"

namespace delaudit::client {

/// Where and how to reach a chat-completions endpoint. base_url schemes:
///   http:// or https://   OpenAI-compatible endpoint
///   mock:<path>           deterministic in-process backend scripted by
///                         the JSON file at <path>
struct EndpointConfig {
  std::string base_url;
  std::string api_key_env = "OPENAI_API_KEY";
  std::string model_name = "mock-model";
  double request_timeout_s = 60.0;
  int max_retries = 3;
  int max_parallel = 4;

  bool is_mock() const;
  std::string mock_script_path() const;  // the part after "mock:"
  void validate() const;                 // throws ConfigError
};

struct ChatRequest {
  std::string item_id;
  RoleTag role_tag = RoleTag::Answer;
  std::vector<Message> messages;
  SamplingParams sampling;
  bool want_logprobs = false;
  int top_logprobs_k = 0;
};

/// One raw completion choice as returned by a backend.
struct Completion {
  std::string output_text;
  std::vector<TokenLogprob> token_logprobs;
  bool has_logprobs = false;
  bool top_k_omitted = false;
};

class ChatBackend {
 public:
  virtual ~ChatBackend() = default;

  /// Returns sampling.n completions. Throws TransientError for retryable
  /// failures and TransportError otherwise.
  virtual std::vector<Completion> complete(const ChatRequest& request) = 0;

  /// Timestamp stamped into traces. The mock backend pins this so runs
  /// are byte-reproducible.
  virtual std::string timestamp() const;
};

/// One slot of a batch result. Failed requests carry an error message
/// instead of aborting the batch.
struct BatchSlot {
  std::vector<GenerationTrace> traces;  // request.sampling.n traces on success
  std::string error;

  bool ok() const { return error.empty(); }
  const GenerationTrace& trace() const { return traces.front(); }
};

/// Retrying, batching front end over a backend. Safe to share across
/// threads; every call is independent.
class ChatClient {
 public:
  ChatClient(EndpointConfig config, std::unique_ptr<ChatBackend> backend);

  /// Picks the backend from config.base_url.
  static ChatClient for_endpoint(const EndpointConfig& config);

  /// Single completion; requires sampling.n == 1.
  GenerationTrace complete(const ChatRequest& request);

  /// All sampling.n completions of one request, as separate traces.
  std::vector<GenerationTrace> complete_many(const ChatRequest& request);

  /// Runs requests with at most `parallelism` in flight (0 = config
  /// max_parallel). Results are returned in request order; per-request
  /// failures are reported in-slot.
  std::vector<BatchSlot> complete_batch(const std::vector<ChatRequest>& requests,
                                        int parallelism = 0);

  /// Test hook replacing the between-retry sleep.
  void set_sleep_hook(std::function<void(double seconds)> hook);

  const EndpointConfig& config() const { return config_; }
  ChatBackend& backend() { return *backend_; }

 private:
  EndpointConfig config_;
  std::unique_ptr<ChatBackend> backend_;
  std::function<void(double)> sleep_;
};

}  // namespace delaudit::client
