#include "datadoc/config.hpp"

#include <cstdlib>
#include <fstream>
#include <stdexcept>

#include "datadoc/retrieval.hpp"
#include "datadoc/util.hpp"

namespace datadoc::config {

using nlohmann::json;

namespace {

std::filesystem::path path_or_empty(const json& j, const char* key) {
  return j.contains(key) ? std::filesystem::path(j.at(key).get<std::string>())
                         : std::filesystem::path();
}

/// Relative paths in a config file resolve against the file's directory.
void resolve_against(std::filesystem::path& p, const std::filesystem::path& base) {
  if (!p.empty() && p.is_relative()) p = base / p;
}

json parse_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open file: " + path.string());
  return json::parse(in);
}

}  // namespace

AppConfig AppConfig::from_json(const json& j) {
  AppConfig cfg;
  if (j.contains("backend")) {
    const json& b = j.at("backend");
    cfg.backend_kind = b.value("kind", cfg.backend_kind);
    cfg.backend_url = b.value("url", cfg.backend_url);
    cfg.backend_model = b.value("model", cfg.backend_model);
    cfg.backend_api_key = b.value("api_key", cfg.backend_api_key);
    cfg.mock_rules_path = path_or_empty(b, "mock_rules");
  }
  if (j.contains("embedder")) {
    const json& e = j.at("embedder");
    cfg.embedder_kind = e.value("kind", cfg.embedder_kind);
    cfg.embedder_dim = e.value("dim", cfg.embedder_dim);
    cfg.embedder_model = e.value("model", cfg.embedder_model);
  }
  cfg.max_retries = j.value("max_retries", cfg.max_retries);
  cfg.max_concurrency = j.value("max_concurrency", cfg.max_concurrency);
  cfg.retrieval_k = j.value("k", cfg.retrieval_k);
  cfg.max_rounds = j.value("max_rounds", cfg.max_rounds);
  if (j.contains("split")) {
    cfg.split.target_len = j.at("split").value("target_len", cfg.split.target_len);
    cfg.split.overlap = j.at("split").value("overlap", cfg.split.overlap);
  }
  cfg.term_dictionary_path = path_or_empty(j, "term_dictionary");
  cfg.category_lists_path = path_or_empty(j, "category_lists");
  cfg.prompt_catalog_path = path_or_empty(j, "prompt_catalog");
  cfg.hypothesis_pairs_path = path_or_empty(j, "hypothesis_pairs");
  cfg.cache_dir = path_or_empty(j, "cache_dir");
  cfg.timestamp_override = j.value("timestamp_override", cfg.timestamp_override);
  cfg.completeness_mode = j.value("completeness_mode", cfg.completeness_mode);
  if (cfg.completeness_mode != "sentinel" && cfg.completeness_mode != "entailment") {
    throw std::runtime_error("completeness_mode must be 'sentinel' or 'entailment'");
  }
  return cfg;
}

AppConfig AppConfig::from_file(const std::filesystem::path& path) {
  AppConfig cfg = from_json(parse_file(path));
  const std::filesystem::path base = path.parent_path();
  resolve_against(cfg.mock_rules_path, base);
  resolve_against(cfg.term_dictionary_path, base);
  resolve_against(cfg.category_lists_path, base);
  resolve_against(cfg.prompt_catalog_path, base);
  resolve_against(cfg.hypothesis_pairs_path, base);
  resolve_against(cfg.cache_dir, base);
  cfg.apply_env();
  return cfg;
}

void AppConfig::apply_env() {
  if (const char* v = std::getenv("BACKEND_URL")) {
    backend_url = v;
    backend_kind = "http";
  }
  if (const char* v = std::getenv("BACKEND_MODEL")) backend_model = v;
  if (const char* v = std::getenv("BACKEND_API_KEY")) backend_api_key = v;
  if (const char* v = std::getenv("MAX_RETRIES")) max_retries = std::stoi(v);
  if (const char* v = std::getenv("MAX_CONCURRENCY")) max_concurrency = std::stoi(v);
}

std::string AppConfig::timestamp() const {
  return timestamp_override.empty() ? util::iso_timestamp_now() : timestamp_override;
}

std::vector<gateway::MockRule> load_mock_rules(const std::filesystem::path& path) {
  const json j = parse_file(path);
  if (!j.is_array()) throw std::runtime_error("mock rules must be a JSON array");
  std::vector<gateway::MockRule> rules;
  for (const auto& item : j) {
    gateway::MockRule rule;
    const std::string match = item.value("match", "substring");
    if (match == "regex") {
      rule.match = gateway::MockRule::Match::Regex;
    } else if (match != "substring") {
      throw std::runtime_error("mock rule match must be 'substring' or 'regex'");
    }
    rule.pattern = item.at("pattern").get<std::string>();
    rule.response = item.at("response").get<std::string>();
    rule.fail_times = item.value("fail_times", 0);
    const std::string kind = item.value("fail_kind", "rate_limited");
    if (kind == "timeout") rule.fail_kind = gateway::ErrorKind::Timeout;
    else if (kind == "rate_limited") rule.fail_kind = gateway::ErrorKind::RateLimited;
    else if (kind == "protocol") rule.fail_kind = gateway::ErrorKind::Protocol;
    else if (kind == "refused") rule.fail_kind = gateway::ErrorKind::Refused;
    else throw std::runtime_error("unknown mock fail_kind '" + kind + "'");
    rules.push_back(std::move(rule));
  }
  return rules;
}

Runtime build_runtime(const AppConfig& cfg) {
  Runtime rt;
  rt.cfg = cfg;

  std::shared_ptr<gateway::CompletionBackend> completion;
  if (cfg.backend_kind == "mock") {
    std::vector<gateway::MockRule> rules;
    if (!cfg.mock_rules_path.empty()) rules = load_mock_rules(cfg.mock_rules_path);
    completion = std::make_shared<gateway::MockBackend>(std::move(rules),
                                                        cfg.backend_model);
  } else if (cfg.backend_kind == "http") {
    if (cfg.backend_url.empty()) throw std::runtime_error("http backend needs a url");
    completion = std::make_shared<gateway::HttpCompletionBackend>(
        gateway::HttpBackendConfig{cfg.backend_url, cfg.backend_model,
                                   cfg.backend_api_key});
  } else {
    throw std::runtime_error("unknown backend kind '" + cfg.backend_kind + "'");
  }

  std::shared_ptr<gateway::EmbeddingBackend> embedding;
  if (cfg.embedder_kind == "test") {
    embedding = std::make_shared<retrieval::TestEmbedder>(cfg.embedder_dim);
  } else if (cfg.embedder_kind == "http") {
    if (cfg.backend_url.empty()) throw std::runtime_error("http embedder needs a url");
    embedding = std::make_shared<retrieval::HttpEmbedder>(
        gateway::HttpBackendConfig{cfg.backend_url, cfg.embedder_model,
                                   cfg.backend_api_key},
        cfg.embedder_dim);
  } else {
    throw std::runtime_error("unknown embedder kind '" + cfg.embedder_kind + "'");
  }

  gateway::RetryPolicy policy;
  policy.max_retries = cfg.max_retries;
  rt.gw = std::make_shared<gateway::Gateway>(std::move(completion), std::move(embedding),
                                             policy, cfg.max_concurrency);

  rt.dictionary = cfg.term_dictionary_path.empty()
                      ? ingest::TermDictionary::defaults()
                      : ingest::TermDictionary::from_json(parse_file(cfg.term_dictionary_path));
  rt.categories = cfg.category_lists_path.empty()
                      ? dims::CategoryLists::defaults()
                      : dims::CategoryLists::from_json(parse_file(cfg.category_lists_path));
  rt.categories.validate();
  rt.catalog = cfg.prompt_catalog_path.empty()
                   ? prompts::PromptCatalog::defaults()
                   : prompts::PromptCatalog::from_file(cfg.prompt_catalog_path);
  rt.hypotheses = cfg.hypothesis_pairs_path.empty()
                      ? completeness::HypothesisCatalog::defaults()
                      : completeness::HypothesisCatalog::from_json(
                            parse_file(cfg.hypothesis_pairs_path));
  return rt;
}

}  // namespace datadoc::config
