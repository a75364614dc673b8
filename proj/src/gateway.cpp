#include "datadoc/gateway.hpp"

#include <chrono>
#include <condition_variable>
#include <random>
#include <thread>

#include "datadoc/util.hpp"
#include "httplib.h"
#include "json.hpp"

namespace datadoc::gateway {

using nlohmann::json;

std::string to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Timeout: return "timeout";
    case ErrorKind::RateLimited: return "rate_limited";
    case ErrorKind::Protocol: return "protocol";
    case ErrorKind::Refused: return "refused";
    case ErrorKind::MockUnmatched: return "mock_unmatched";
  }
  return "unknown";
}

bool is_transient(ErrorKind kind) {
  return kind == ErrorKind::Timeout || kind == ErrorKind::RateLimited ||
         kind == ErrorKind::Protocol;
}

BackendError::BackendError(ErrorKind kind, int attempts, std::string detail)
    : std::runtime_error(to_string(kind) + " after " + std::to_string(attempts) +
                         " attempt(s): " + detail),
      kind_(kind),
      attempts_(attempts),
      detail_(std::move(detail)) {}

// ---------------------------------------------------------------------------
// MockBackend

MockBackend::MockBackend(std::vector<MockRule> rules, std::string model_id)
    : model_id_(std::move(model_id)) {
  rules_.reserve(rules.size());
  for (auto& r : rules) {
    RuleState state;
    state.failures_left = r.fail_times;
    if (r.match == MockRule::Match::Regex) {
      state.compiled = std::regex(r.pattern);
    }
    state.rule = std::move(r);
    rules_.push_back(std::move(state));
  }
}

CompletionResult MockBackend::complete(const CompletionRequest& req) {
  std::lock_guard lock(mu_);
  for (auto& state : rules_) {
    const bool matched =
        state.rule.match == MockRule::Match::Substring
            ? req.prompt.find(state.rule.pattern) != std::string::npos
            : std::regex_search(req.prompt, state.compiled);
    if (!matched) continue;
    if (state.failures_left > 0) {
      --state.failures_left;
      throw BackendError(state.rule.fail_kind, 1, "scripted failure for rule '" +
                                                      state.rule.pattern + "'");
    }
    return CompletionResult{state.rule.response, {}, 0.0};
  }
  throw BackendError(ErrorKind::MockUnmatched, 1,
                     "no mock rule matches prompt (tag=" + req.tag + ")");
}

// ---------------------------------------------------------------------------
// HttpCompletionBackend

HttpCompletionBackend::HttpCompletionBackend(HttpBackendConfig config)
    : config_(std::move(config)) {}

CompletionResult HttpCompletionBackend::complete(const CompletionRequest& req) {
  httplib::Client client(config_.url);
  client.set_connection_timeout(config_.timeout_sec);
  client.set_read_timeout(config_.timeout_sec);
  httplib::Headers headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }
  json body = {
      {"model", config_.model},
      {"messages", json::array({{{"role", "user"}, {"content", req.prompt}}})},
      {"temperature", req.temperature},
      {"max_tokens", req.max_tokens},
  };
  const auto start = std::chrono::steady_clock::now();
  auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
  const double latency =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
          .count();
  if (!res) {
    throw BackendError(ErrorKind::Timeout, 1, "no response from " + config_.url);
  }
  if (res->status == 429) {
    throw BackendError(ErrorKind::RateLimited, 1, "HTTP 429");
  }
  if (res->status >= 500) {
    throw BackendError(ErrorKind::Protocol, 1, "HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw BackendError(ErrorKind::Refused,
                       1, "HTTP " + std::to_string(res->status) + ": " + res->body);
  }
  json parsed;
  try {
    parsed = json::parse(res->body);
  } catch (const json::exception& e) {
    throw BackendError(ErrorKind::Protocol, 1, std::string("bad JSON body: ") + e.what());
  }
  if (!parsed.contains("choices") || parsed["choices"].empty()) {
    throw BackendError(ErrorKind::Protocol, 1, "response has no choices");
  }
  CompletionResult out;
  out.text = parsed["choices"][0].value("message", json::object()).value("content", "");
  out.latency_ms = latency;
  if (parsed.contains("usage")) {
    out.usage.prompt_tokens = parsed["usage"].value("prompt_tokens", -1);
    out.usage.completion_tokens = parsed["usage"].value("completion_tokens", -1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gateway

namespace {

class ConcurrencyGuard {
 public:
  ConcurrencyGuard(std::mutex& mu, std::condition_variable& cv, int& in_flight, int cap)
      : mu_(mu), cv_(cv), in_flight_(in_flight) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return in_flight_ < cap; });
    ++in_flight_;
  }
  ~ConcurrencyGuard() {
    {
      std::lock_guard lock(mu_);
      --in_flight_;
    }
    cv_.notify_one();
  }

 private:
  std::mutex& mu_;
  std::condition_variable& cv_;
  int& in_flight_;
};

}  // namespace

Gateway::Gateway(std::shared_ptr<CompletionBackend> completion,
                 std::shared_ptr<EmbeddingBackend> embedding, RetryPolicy policy,
                 int max_concurrency)
    : completion_(std::move(completion)),
      embedding_(std::move(embedding)),
      policy_(policy),
      max_concurrency_(max_concurrency > 0 ? max_concurrency : 1) {}

void Gateway::sleep_backoff(int attempt) {
  if (policy_.backoff_base_ms <= 0) return;
  static thread_local std::mt19937 rng{std::random_device{}()};
  std::uniform_real_distribution<double> dist(1.0 - policy_.jitter, 1.0 + policy_.jitter);
  const double ms = policy_.backoff_base_ms * std::pow(2.0, attempt) * dist(rng);
  std::this_thread::sleep_for(std::chrono::duration<double, std::milli>(ms));
}

CompletionResult Gateway::complete(const CompletionRequest& req) {
  if (req.prompt.empty()) throw std::invalid_argument("completion prompt is empty");
  ConcurrencyGuard guard(mu_, cv_, in_flight_, max_concurrency_);
  int attempts = 0;
  while (true) {
    ++attempts;
    try {
      const auto start = std::chrono::steady_clock::now();
      CompletionResult result = completion_->complete(req);
      if (result.latency_ms == 0.0) {
        result.latency_ms = std::chrono::duration<double, std::milli>(
                                std::chrono::steady_clock::now() - start)
                                .count();
      }
      result.text = util::rtrim(result.text);
      log({req.tag, CallRecord::Kind::Complete, attempts, true, ""});
      return result;
    } catch (const BackendError& e) {
      if (is_transient(e.kind()) && attempts <= policy_.max_retries) {
        sleep_backoff(attempts - 1);
        continue;
      }
      log({req.tag, CallRecord::Kind::Complete, attempts, false, to_string(e.kind())});
      throw BackendError(e.kind(), attempts, e.detail());
    }
  }
}

std::vector<float> Gateway::embed(const std::string& text, const std::string& tag) {
  if (text.empty()) throw std::invalid_argument("cannot embed empty text");
  ConcurrencyGuard guard(mu_, cv_, in_flight_, max_concurrency_);
  int attempts = 0;
  while (true) {
    ++attempts;
    try {
      std::vector<float> vec = embedding_->embed(text);
      log({tag, CallRecord::Kind::Embed, attempts, true, ""});
      return vec;
    } catch (const BackendError& e) {
      if (is_transient(e.kind()) && attempts <= policy_.max_retries) {
        sleep_backoff(attempts - 1);
        continue;
      }
      log({tag, CallRecord::Kind::Embed, attempts, false, to_string(e.kind())});
      throw BackendError(e.kind(), attempts, e.detail());
    }
  }
}

int Gateway::embedding_dim() const { return embedding_->dim(); }
std::string Gateway::model_id() const { return completion_->model_id(); }
std::string Gateway::embedder_id() const { return embedding_->id(); }

void Gateway::log(CallRecord record) {
  std::lock_guard lock(mu_);
  log_.push_back(std::move(record));
}

std::vector<CallRecord> Gateway::call_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

size_t Gateway::embed_call_count() const {
  std::lock_guard lock(mu_);
  size_t n = 0;
  for (const auto& r : log_) {
    if (r.kind == CallRecord::Kind::Embed) ++n;
  }
  return n;
}

size_t Gateway::completion_call_count() const {
  std::lock_guard lock(mu_);
  size_t n = 0;
  for (const auto& r : log_) {
    if (r.kind == CallRecord::Kind::Complete) ++n;
  }
  return n;
}

}  // namespace datadoc::gateway
