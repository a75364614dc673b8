#include "datadoc/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "httplib.h"
#include "json.hpp"

namespace datadoc::retrieval {

using nlohmann::json;

double l2_norm(const Vec& v) {
  double sum = 0.0;
  for (float x : v) sum += static_cast<double>(x) * x;
  return std::sqrt(sum);
}

void l2_normalize(Vec& v) {
  const double norm = l2_norm(v);
  if (norm == 0.0) return;
  for (float& x : v) x = static_cast<float>(x / norm);
}

// ---------------------------------------------------------------------------
// TestEmbedder

TestEmbedder::TestEmbedder(int dim) : dim_(dim) {
  if (dim_ < 2) throw std::invalid_argument("embedding dim must be >= 2");
}

std::string TestEmbedder::id() const { return "test-ngram-" + std::to_string(dim_); }

Vec TestEmbedder::embed(const std::string& text) {
  // FNV-1a over each padded character 3-gram; one hash bit picks the sign.
  Vec v(dim_, 0.0f);
  const std::string padded = "^" + text + "$";
  for (size_t i = 0; i + 3 <= padded.size(); ++i) {
    uint64_t h = 1469598103934665603ull;
    for (size_t j = i; j < i + 3; ++j) {
      h ^= static_cast<unsigned char>(padded[j]);
      h *= 1099511628211ull;
    }
    const size_t bucket = h % static_cast<uint64_t>(dim_);
    const float sign = (h >> 32 & 1) ? 1.0f : -1.0f;
    v[bucket] += sign;
  }
  return v;
}

// ---------------------------------------------------------------------------
// HttpEmbedder

HttpEmbedder::HttpEmbedder(gateway::HttpBackendConfig config, int dim)
    : config_(std::move(config)), dim_(dim) {}

Vec HttpEmbedder::embed(const std::string& text) {
  httplib::Client client(config_.url);
  client.set_connection_timeout(config_.timeout_sec);
  client.set_read_timeout(config_.timeout_sec);
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }
  json body = {{"model", config_.model}, {"input", json::array({text})}};
  auto res = client.Post("/v1/embeddings", headers, body.dump(), "application/json");
  if (!res) {
    throw gateway::BackendError(gateway::ErrorKind::Timeout, 1,
                                "no response from " + config_.url);
  }
  if (res->status == 429) {
    throw gateway::BackendError(gateway::ErrorKind::RateLimited, 1, "HTTP 429");
  }
  if (res->status >= 500) {
    throw gateway::BackendError(gateway::ErrorKind::Protocol, 1,
                                "HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw gateway::BackendError(gateway::ErrorKind::Refused, 1,
                                "HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  json parsed;
  try {
    parsed = json::parse(res->body);
  } catch (const json::exception& e) {
    throw gateway::BackendError(gateway::ErrorKind::Protocol, 1,
                                std::string("bad JSON body: ") + e.what());
  }
  if (!parsed.contains("data") || parsed["data"].empty() ||
      !parsed["data"][0].contains("embedding")) {
    throw gateway::BackendError(gateway::ErrorKind::Protocol, 1,
                                "response has no embedding data");
  }
  Vec v = parsed["data"][0]["embedding"].get<Vec>();
  if (static_cast<int>(v.size()) != dim_) {
    throw gateway::BackendError(
        gateway::ErrorKind::Protocol, 1,
        "embedding dim mismatch: got " + std::to_string(v.size()) + ", expected " +
            std::to_string(dim_));
  }
  return v;
}

// ---------------------------------------------------------------------------

Vec embed(gateway::Gateway& gw, const std::string& text, const std::string& tag) {
  if (text.empty()) throw std::invalid_argument("cannot embed empty text");
  Vec v = gw.embed(text, tag);
  l2_normalize(v);
  return v;
}

VectorIndex build_index(const std::vector<std::string>& texts, gateway::Gateway& gw) {
  if (texts.empty()) throw std::invalid_argument("cannot index zero passages");
  VectorIndex index;
  index.dim = gw.embedding_dim();
  index.entries.reserve(texts.size());
  for (size_t i = 0; i < texts.size(); ++i) {
    try {
      index.entries.emplace_back(static_cast<int>(i),
                                 embed(gw, texts[i], "index:" + std::to_string(i)));
    } catch (const gateway::BackendError& e) {
      throw std::runtime_error("embedding passage " + std::to_string(i) +
                               " failed: " + e.what());
    }
  }
  return index;
}

std::vector<RetrievalHit> top_k(const VectorIndex& index, const Vec& query, int k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  if (static_cast<int>(query.size()) != index.dim) {
    throw std::invalid_argument("query dim " + std::to_string(query.size()) +
                                " does not match index dim " + std::to_string(index.dim));
  }
  std::vector<RetrievalHit> hits;
  hits.reserve(index.entries.size());
  for (const auto& [idx, vec] : index.entries) {
    float dot = 0.0f;
    for (size_t d = 0; d < vec.size(); ++d) dot += vec[d] * query[d];
    hits.push_back({idx, dot});
  }
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.passage_index < b.passage_index;
  });
  if (hits.size() > static_cast<size_t>(k)) hits.resize(static_cast<size_t>(k));
  return hits;
}

}  // namespace datadoc::retrieval
