#pragma once

#include <memory>
#include <string>
#include <vector>

#include "delaudit/client.hpp"

namespace delaudit::noise {

struct EmbeddingVector {
  std::vector<double> values;
  int dim() const { return static_cast<int>(values.size()); }
};

/// dot(a,b) / (|a||b|). Throws ContractError on dimension mismatch or a
/// zero vector.
double cosine_similarity(const EmbeddingVector& a, const EmbeddingVector& b);

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// One vector per text; fixed dimension per backend. Throws
  /// ContractError on an empty input list.
  virtual std::vector<EmbeddingVector> embed(
      const std::vector<std::string>& texts) = 0;
};

/// Deterministic test embedder: character trigrams hashed into a 64-dim
/// count vector. Identical texts embed identically; texts sharing no
/// trigram are near-orthogonal. Texts shorter than three characters
/// contribute the whole text as a single feature.
class TrigramMockEmbedder : public Embedder {
 public:
  static constexpr int kDim = 64;
  std::vector<EmbeddingVector> embed(
      const std::vector<std::string>& texts) override;
};

/// POST {base_url}/v1/embeddings with {"model", "input": [texts]}, reading
/// data[i].embedding. Retries transient failures like the chat client.
class RemoteEmbedder : public Embedder {
 public:
  explicit RemoteEmbedder(client::EndpointConfig config);
  std::vector<EmbeddingVector> embed(
      const std::vector<std::string>& texts) override;

 private:
  client::EndpointConfig config_;
  std::string api_key_;
};

/// mock: scheme selects the trigram embedder (no script needed), http(s)
/// the remote one.
std::unique_ptr<Embedder> make_embedder(const client::EndpointConfig& config);

}  // namespace delaudit::noise
