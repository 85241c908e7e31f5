#include <cstdlib>
#include <memory>

#include <httplib.h>
#include <json.hpp>

#include "delaudit/client.hpp"
#include "delaudit/errors.hpp"

namespace delaudit::client {

using nlohmann::json;

namespace {

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path_prefix;
};

UrlParts split_url(const std::string& base_url) {
  auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw ConfigError("bad base_url: " + base_url);
  }
  auto path_start = base_url.find('/', scheme_end + 3);
  UrlParts parts;
  if (path_start == std::string::npos) {
    parts.origin = base_url;
  } else {
    parts.origin = base_url.substr(0, path_start);
    parts.path_prefix = base_url.substr(path_start);
    while (!parts.path_prefix.empty() && parts.path_prefix.back() == '/') {
      parts.path_prefix.pop_back();
    }
  }
  return parts;
}

class HttpBackend : public ChatBackend {
 public:
  explicit HttpBackend(EndpointConfig config) : config_(std::move(config)) {
    const char* key = nullptr;
    if (!config_.api_key_env.empty()) {
      key = std::getenv(config_.api_key_env.c_str());
    }
    if (key == nullptr || *key == '\0') {
      throw ConfigError("API key environment variable " + config_.api_key_env +
                        " is not set (required for " + config_.base_url + ")");
    }
    api_key_ = key;
    url_ = split_url(config_.base_url);
  }

  std::vector<Completion> complete(const ChatRequest& request) override {
    json body = build_body(request, /*include_top_k=*/true);
    auto result = post(body);
    // Some endpoints reject non-standard top_k; drop it once and mark the
    // omission in the trace.
    if (result.status == 400 && request.sampling.top_k > 0 &&
        result.body.find("top_k") != std::string::npos) {
      json retry_body = build_body(request, /*include_top_k=*/false);
      auto retry_result = post(retry_body);
      auto completions = parse(retry_result, request);
      for (auto& c : completions) c.top_k_omitted = true;
      return completions;
    }
    return parse(result, request);
  }

 private:
  struct HttpResult {
    int status = 0;
    std::string body;
  };

  json build_body(const ChatRequest& request, bool include_top_k) const {
    json messages = json::array();
    for (const auto& m : request.messages) {
      messages.push_back(json{{"role", m.role}, {"content", m.text}});
    }
    json body{{"model", config_.model_name},
              {"messages", messages},
              {"temperature", request.sampling.temperature},
              {"top_p", request.sampling.top_p},
              {"max_tokens", request.sampling.max_tokens},
              {"n", request.sampling.n}};
    if (include_top_k && request.sampling.top_k > 0) {
      body["top_k"] = request.sampling.top_k;
    }
    if (request.sampling.seed.has_value()) {
      body["seed"] = *request.sampling.seed;
    }
    if (request.want_logprobs) {
      body["logprobs"] = true;
      if (request.top_logprobs_k > 0) {
        body["top_logprobs"] = request.top_logprobs_k;
      }
    }
    return body;
  }

  HttpResult post(const json& body) const {
    httplib::Client http(url_.origin);
    http.set_connection_timeout(std::chrono::duration<double>(
        config_.request_timeout_s));
    http.set_read_timeout(
        std::chrono::duration<double>(config_.request_timeout_s));
    httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
    auto res = http.Post(url_.path_prefix + "/v1/chat/completions", headers,
                         body.dump(), "application/json");
    if (!res) {
      throw TransientError("request to " + config_.base_url + " failed: " +
                           httplib::to_string(res.error()));
    }
    if (res->status == 408 || res->status == 429 || res->status >= 500) {
      throw TransientError("endpoint " + config_.base_url + " returned " +
                           std::to_string(res->status));
    }
    return HttpResult{res->status, res->body};
  }

  std::vector<Completion> parse(const HttpResult& result,
                                const ChatRequest& request) const {
    if (result.status != 200) {
      throw TransportError("endpoint " + config_.base_url + " returned " +
                           std::to_string(result.status) + ": " +
                           result.body.substr(0, 512));
    }
    json j;
    try {
      j = json::parse(result.body);
    } catch (const json::exception& e) {
      throw TransportError("bad JSON from " + config_.base_url + ": " +
                           e.what());
    }
    std::vector<Completion> completions;
    for (const auto& choice : j.value("choices", json::array())) {
      Completion c;
      c.output_text = choice.at("message").value("content", "");
      const auto& lp = choice.value("logprobs", json());
      if (lp.is_object() && lp.contains("content") &&
          lp.at("content").is_array()) {
        for (const auto& tok : lp.at("content")) {
          TokenLogprob tl;
          tl.token = tok.value("token", "");
          // Clamp tiny positive values some servers emit.
          tl.logprob = std::min(tok.value("logprob", 0.0), 0.0);
          for (const auto& alt : tok.value("top_logprobs", json::array())) {
            tl.top_alternatives.emplace_back(
                alt.value("token", ""),
                std::min(alt.value("logprob", 0.0), 0.0));
          }
          c.token_logprobs.push_back(std::move(tl));
        }
        c.has_logprobs = true;
      }
      completions.push_back(std::move(c));
    }
    if (completions.empty()) {
      throw TransportError("endpoint " + config_.base_url +
                           " returned no choices");
    }
    if (static_cast<int>(completions.size()) != request.sampling.n) {
      throw TransportError("endpoint returned " +
                           std::to_string(completions.size()) +
                           " choices, expected " +
                           std::to_string(request.sampling.n));
    }
    return completions;
  }

  EndpointConfig config_;
  std::string api_key_;
  UrlParts url_;
};

}  // namespace

std::unique_ptr<ChatBackend> make_http_backend(const EndpointConfig& config) {
  return std::make_unique<HttpBackend>(config);
}

}  // namespace delaudit::client
