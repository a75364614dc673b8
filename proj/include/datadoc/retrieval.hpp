#pragma once

#include <string>
#include <vector>

#include "datadoc/gateway.hpp"

namespace datadoc::retrieval {

using Vec = std::vector<float>;

/// In-place L2 normalization. Zero vectors are left untouched.
void l2_normalize(Vec& v);

double l2_norm(const Vec& v);

/// Deterministic offline embedder: character 3-grams feature-hashed into
/// `dim` signed buckets. Purely a test/CI device; retrieval quality is not
/// the point, reproducibility is.
class TestEmbedder : public gateway::EmbeddingBackend {
 public:
  explicit TestEmbedder(int dim = 64);
  Vec embed(const std::string& text) override;
  int dim() const override { return dim_; }
  std::string id() const override;

 private:
  int dim_;
};

/// Remote embedder speaking the widely adopted embeddings endpoint shape:
///   request  {model, input:[text,...]}
///   response {data:[{embedding:[...]}]}
class HttpEmbedder : public gateway::EmbeddingBackend {
 public:
  explicit HttpEmbedder(gateway::HttpBackendConfig config, int dim);
  Vec embed(const std::string& text) override;
  int dim() const override { return dim_; }
  std::string id() const override { return "http:" + config_.model; }

 private:
  gateway::HttpBackendConfig config_;
  int dim_;
};

/// Embed through the gateway (retries + call log) and normalize.
Vec embed(gateway::Gateway& gw, const std::string& text, const std::string& tag = "embed");

struct RetrievalHit {
  int passage_index = 0;
  float score = 0.0f;  // cosine similarity, [-1, 1]
};

/// Immutable exact-search index: one normalized vector per passage.
struct VectorIndex {
  int dim = 0;
  std::vector<std::pair<int, Vec>> entries;  // (passage index, vector)

  size_t size() const { return entries.size(); }
};

/// Embeds `texts` in order; entry i keeps passage index i. Embedder errors
/// are rethrown with the failing passage index attached.
VectorIndex build_index(const std::vector<std::string>& texts, gateway::Gateway& gw);

/// Exact top-k by cosine similarity (dot product of normalized vectors).
/// Ties break by ascending passage index. Returns min(k, |index|) hits.
std::vector<RetrievalHit> top_k(const VectorIndex& index, const Vec& query, int k);

}  // namespace datadoc::retrieval
