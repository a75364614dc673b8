#pragma once

#include <cstdint>
#include <memory>
#include <condition_variable>
#include <mutex>
#include <optional>
#include <regex>
#include <stdexcept>
#include <string>
#include <vector>

namespace datadoc::gateway {

enum class ErrorKind { Timeout, RateLimited, Protocol, Refused, MockUnmatched };

std::string to_string(ErrorKind kind);

/// Raised when a backend call fails for good (after retries, where the
/// failure kind is transient).
class BackendError : public std::runtime_error {
 public:
  BackendError(ErrorKind kind, int attempts, std::string detail);

  ErrorKind kind() const { return kind_; }
  int attempts() const { return attempts_; }
  const std::string& detail() const { return detail_; }

 private:
  ErrorKind kind_;
  int attempts_;
  std::string detail_;
};

struct CompletionRequest {
  std::string prompt;
  int max_tokens = 512;
  double temperature = 0.0;
  std::string tag;  // originating (dimension, step) identity for logs
};

struct Usage {
  long prompt_tokens = -1;
  long completion_tokens = -1;
  bool known() const { return prompt_tokens >= 0 && completion_tokens >= 0; }
};

struct CompletionResult {
  std::string text;
  Usage usage;
  double latency_ms = 0.0;
};

class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual CompletionResult complete(const CompletionRequest& req) = 0;
  virtual std::string model_id() const = 0;
};

class EmbeddingBackend {
 public:
  virtual ~EmbeddingBackend() = default;
  virtual std::vector<float> embed(const std::string& text) = 0;
  virtual int dim() const = 0;
  virtual std::string id() const = 0;
};

/// One scripted rule of the mock backend. First matching rule wins.
/// `fail_times` > 0 makes the rule fail that many calls with `fail_kind`
/// before responding, which lets tests exercise the retry path.
struct MockRule {
  enum class Match { Substring, Regex };
  Match match = Match::Substring;
  std::string pattern;
  std::string response;
  int fail_times = 0;
  ErrorKind fail_kind = ErrorKind::RateLimited;
};

class MockBackend : public CompletionBackend {
 public:
  explicit MockBackend(std::vector<MockRule> rules, std::string model_id = "mock");

  CompletionResult complete(const CompletionRequest& req) override;
  std::string model_id() const override { return model_id_; }

 private:
  struct RuleState {
    MockRule rule;
    std::regex compiled;  // valid when rule.match == Regex
    int failures_left = 0;
  };
  std::vector<RuleState> rules_;
  std::string model_id_;
  std::mutex mu_;
};

struct HttpBackendConfig {
  std::string url;  // e.g. "http://host:port"; path fixed per wire contract
  std::string model;
  std::string api_key;
  int timeout_sec = 60;
};

/// Chat-completions wire shape:
///   request  {model, messages:[{role,content}], temperature, max_tokens}
///   response {choices:[{message:{content}}], usage?}
class HttpCompletionBackend : public CompletionBackend {
 public:
  explicit HttpCompletionBackend(HttpBackendConfig config);
  CompletionResult complete(const CompletionRequest& req) override;
  std::string model_id() const override { return config_.model; }

 private:
  HttpBackendConfig config_;
};

struct CallRecord {
  enum class Kind { Complete, Embed };
  std::string tag;
  Kind kind = Kind::Complete;
  int attempts = 1;
  bool ok = true;
  std::string error;
};

struct RetryPolicy {
  int max_retries = 3;
  double backoff_base_ms = 500.0;
  double jitter = 0.2;  // +-20%
};

/// Shared entry point for every backend call. Applies retry with
/// exponential backoff to transient failures, trims trailing whitespace
/// from completions, caps in-flight concurrency, and keeps an append-only
/// call log used by cache and cost accounting tests.
class Gateway {
 public:
  Gateway(std::shared_ptr<CompletionBackend> completion,
          std::shared_ptr<EmbeddingBackend> embedding, RetryPolicy policy = {},
          int max_concurrency = 4);

  CompletionResult complete(const CompletionRequest& req);
  std::vector<float> embed(const std::string& text, const std::string& tag = "embed");

  int embedding_dim() const;
  std::string model_id() const;
  std::string embedder_id() const;

  std::vector<CallRecord> call_log() const;
  size_t embed_call_count() const;
  size_t completion_call_count() const;

 private:
  void log(CallRecord record);
  void sleep_backoff(int attempt);

  std::shared_ptr<CompletionBackend> completion_;
  std::shared_ptr<EmbeddingBackend> embedding_;
  RetryPolicy policy_;
  int max_concurrency_;
  int in_flight_ = 0;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::vector<CallRecord> log_;
};

/// Transient failures are retried, the rest surface immediately.
bool is_transient(ErrorKind kind);

}  // namespace datadoc::gateway
