#include "delaudit/client.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <mutex>
#include <random>
#include <thread>

#include "delaudit/errors.hpp"
#include "delaudit/util.hpp"

namespace delaudit::client {

std::unique_ptr<ChatBackend> make_http_backend(const EndpointConfig& config);
std::unique_ptr<ChatBackend> make_mock_backend(const std::string& script_path);

bool EndpointConfig::is_mock() const {
  return base_url.rfind("mock:", 0) == 0;
}

std::string EndpointConfig::mock_script_path() const {
  return base_url.substr(5);
}

void EndpointConfig::validate() const {
  if (base_url.empty()) throw ConfigError("endpoint base_url is empty");
  if (!is_mock() && base_url.rfind("http://", 0) != 0 &&
      base_url.rfind("https://", 0) != 0) {
    throw ConfigError("unsupported base_url scheme: " + base_url);
  }
  if (max_parallel < 1) throw ConfigError("max_parallel must be >= 1");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (request_timeout_s <= 0) throw ConfigError("request_timeout must be > 0");
}

std::string ChatBackend::timestamp() const { return util::utc_now_iso8601(); }

ChatClient::ChatClient(EndpointConfig config,
                       std::unique_ptr<ChatBackend> backend)
    : config_(std::move(config)), backend_(std::move(backend)) {
  config_.validate();
  sleep_ = [](double seconds) {
    std::this_thread::sleep_for(std::chrono::duration<double>(seconds));
  };
}

ChatClient ChatClient::for_endpoint(const EndpointConfig& config) {
  config.validate();
  if (config.is_mock()) {
    return ChatClient(config, make_mock_backend(config.mock_script_path()));
  }
  return ChatClient(config, make_http_backend(config));
}

void ChatClient::set_sleep_hook(std::function<void(double)> hook) {
  sleep_ = std::move(hook);
}

namespace {

double backoff_seconds(int attempt) {
  // 0.5s * 2^attempt with +-25% jitter.
  thread_local std::mt19937_64 rng{std::random_device{}()};
  std::uniform_real_distribution<double> jitter(0.75, 1.25);
  return 0.5 * std::pow(2.0, attempt) * jitter(rng);
}

}  // namespace

std::vector<GenerationTrace> ChatClient::complete_many(
    const ChatRequest& request) {
  if (request.messages.empty()) {
    throw ContractError("complete: messages must be non-empty");
  }
  if (request.sampling.n < 1) {
    throw ContractError("complete: sampling.n must be >= 1");
  }

  std::vector<Completion> completions;
  int retries = 0;
  for (int attempt = 0;; ++attempt) {
    try {
      completions = backend_->complete(request);
      break;
    } catch (const TransientError&) {
      if (attempt >= config_.max_retries) throw;
      sleep_(backoff_seconds(attempt));
      ++retries;
    }
  }

  std::vector<GenerationTrace> traces;
  traces.reserve(completions.size());
  std::string stamp = backend_->timestamp();
  for (auto& c : completions) {
    if (request.want_logprobs && !c.has_logprobs) {
      throw CapabilityError("endpoint returned no logprobs for item " +
                            request.item_id);
    }
    GenerationTrace t;
    t.item_id = request.item_id;
    t.role_tag = request.role_tag;
    t.prompt_messages = request.messages;
    t.output_text = std::move(c.output_text);
    t.token_logprobs = std::move(c.token_logprobs);
    t.sampling = request.sampling;
    t.created_at = stamp;
    t.retry_count = retries;
    t.top_k_omitted = c.top_k_omitted;
    traces.push_back(std::move(t));
  }
  return traces;
}

GenerationTrace ChatClient::complete(const ChatRequest& request) {
  if (request.sampling.n != 1) {
    throw ContractError("complete: use complete_many for sampling.n > 1");
  }
  return complete_many(request).front();
}

std::vector<BatchSlot> ChatClient::complete_batch(
    const std::vector<ChatRequest>& requests, int parallelism) {
  if (parallelism <= 0) parallelism = config_.max_parallel;
  if (parallelism > config_.max_parallel) {
    throw ContractError("parallelism exceeds endpoint max_parallel");
  }

  std::vector<BatchSlot> slots(requests.size());
  if (requests.empty()) return slots;

  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= requests.size()) return;
      try {
        slots[i].traces = complete_many(requests[i]);
      } catch (const std::exception& e) {
        slots[i].error = e.what();
      }
    }
  };

  std::size_t n_workers =
      std::min<std::size_t>(static_cast<std::size_t>(parallelism),
                            requests.size());
  std::vector<std::thread> workers;
  workers.reserve(n_workers);
  for (std::size_t i = 0; i < n_workers; ++i) workers.emplace_back(worker);
  for (auto& w : workers) w.join();
  return slots;
}

}  // namespace delaudit::client
