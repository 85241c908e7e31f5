#include "delaudit/embed.hpp"

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "delaudit/errors.hpp"
#include "delaudit/util.hpp"

namespace delaudit::noise {

using nlohmann::json;

double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b) {
  if (a.dim() != b.dim()) {
    throw ContractError("cosine_similarity: dimension mismatch");
  }
  double dot = 0.0;
  double na = 0.0;
  double nb = 0.0;
  for (int i = 0; i < a.dim(); ++i) {
    dot += a.values[i] * b.values[i];
    na += a.values[i] * a.values[i];
    nb += b.values[i] * b.values[i];
  }
  if (na == 0.0 || nb == 0.0) {
    throw ContractError("cosine_similarity: zero vector");
  }
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

namespace {

// Signed feature hashing: the sign bit keeps colliding trigrams from
// different texts uncorrelated, while shared trigrams still add up
// positively (sign * sign = 1).
void add_feature(EmbeddingVector& v, std::string_view feature) {
  std::uint64_t h = util::fnv1a64(feature);
  double sign = (h >> 32) & 1 ? 1.0 : -1.0;
  v.values[h % TrigramMockEmbedder::kDim] += sign;
}

}  // namespace

std::vector<EmbeddingVector> TrigramMockEmbedder::embed(
    const std::vector<std::string>& texts) {
  if (texts.empty()) throw ContractError("embed: empty input");
  std::vector<EmbeddingVector> out;
  out.reserve(texts.size());
  for (const auto& text : texts) {
    EmbeddingVector v;
    v.values.assign(kDim, 0.0);
    if (text.size() < 3) {
      add_feature(v, text);
    } else {
      for (std::size_t i = 0; i + 3 <= text.size(); ++i) {
        add_feature(v, std::string_view(text).substr(i, 3));
      }
    }
    out.push_back(std::move(v));
  }
  return out;
}

RemoteEmbedder::RemoteEmbedder(client::EndpointConfig config)
    : config_(std::move(config)) {
  config_.validate();
  const char* key = nullptr;
  if (!config_.api_key_env.empty()) {
    key = std::getenv(config_.api_key_env.c_str());
  }
  if (key == nullptr || *key == '\0') {
    throw ConfigError("API key environment variable " + config_.api_key_env +
                      " is not set (required for " + config_.base_url + ")");
  }
  api_key_ = key;
}

std::vector<EmbeddingVector> RemoteEmbedder::embed(
    const std::vector<std::string>& texts) {
  if (texts.empty()) throw ContractError("embed: empty input");

  auto scheme_end = config_.base_url.find("://");
  auto path_start = config_.base_url.find('/', scheme_end + 3);
  std::string origin = path_start == std::string::npos
                           ? config_.base_url
                           : config_.base_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos
                           ? ""
                           : config_.base_url.substr(path_start);

  json body{{"model", config_.model_name}, {"input", texts}};
  std::string response_body;
  for (int attempt = 0;; ++attempt) {
    try {
      httplib::Client http(origin);
      http.set_read_timeout(
          std::chrono::duration<double>(config_.request_timeout_s));
      httplib::Headers headers{{"Authorization", "Bearer " + api_key_}};
      auto res = http.Post(prefix + "/v1/embeddings", headers, body.dump(),
                           "application/json");
      if (!res) {
        throw TransientError("embeddings request to " + config_.base_url +
                             " failed: " + httplib::to_string(res.error()));
      }
      if (res->status == 408 || res->status == 429 || res->status >= 500) {
        throw TransientError("embeddings endpoint returned " +
                             std::to_string(res->status));
      }
      if (res->status != 200) {
        throw TransportError("embeddings endpoint returned " +
                             std::to_string(res->status) + ": " +
                             res->body.substr(0, 512));
      }
      response_body = res->body;
      break;
    } catch (const TransientError&) {
      if (attempt >= config_.max_retries) throw;
      std::this_thread::sleep_for(std::chrono::duration<double>(
          0.5 * std::pow(2.0, attempt)));
    }
  }

  json j;
  try {
    j = json::parse(response_body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("bad embeddings JSON: ") + e.what());
  }
  std::vector<EmbeddingVector> out;
  for (const auto& row : j.at("data")) {
    EmbeddingVector v;
    row.at("embedding").get_to(v.values);
    out.push_back(std::move(v));
  }
  if (out.size() != texts.size()) {
    throw TransportError("embeddings endpoint returned " +
                         std::to_string(out.size()) + " vectors for " +
                         std::to_string(texts.size()) + " inputs");
  }
  return out;
}

std::unique_ptr<Embedder> make_embedder(const client::EndpointConfig& config) {
  if (config.is_mock()) return std::make_unique<TrigramMockEmbedder>();
  return std::make_unique<RemoteEmbedder>(config);
}

}  // namespace delaudit::noise
