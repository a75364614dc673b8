#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "datadoc/completeness.hpp"
#include "datadoc/dimensions.hpp"
#include "datadoc/gateway.hpp"
#include "datadoc/ingest.hpp"
#include "datadoc/prompt_catalog.hpp"
#include "json.hpp"

namespace datadoc::config {

struct AppConfig {
  // backend: "mock" reads scripted rules, "http" speaks the chat wire shape
  std::string backend_kind = "mock";
  std::string backend_url;
  std::string backend_model = "mock";
  std::string backend_api_key;
  std::filesystem::path mock_rules_path;

  // embedder: "test" is the deterministic n-gram hasher, "http" is remote
  std::string embedder_kind = "test";
  int embedder_dim = 64;
  std::string embedder_model;

  int max_retries = 3;
  int max_concurrency = 4;
  int retrieval_k = 4;
  int max_rounds = 3;
  ingest::SplitConfig split;

  std::filesystem::path term_dictionary_path;
  std::filesystem::path category_lists_path;
  std::filesystem::path prompt_catalog_path;
  std::filesystem::path hypothesis_pairs_path;
  std::filesystem::path cache_dir;

  // fixed timestamp for reproducible record output; empty = wall clock
  std::string timestamp_override;
  std::string completeness_mode = "sentinel";  // or "entailment"

  static AppConfig from_json(const nlohmann::json& j);
  static AppConfig from_file(const std::filesystem::path& path);

  /// BACKEND_URL, BACKEND_MODEL, BACKEND_API_KEY, MAX_RETRIES,
  /// MAX_CONCURRENCY take precedence over file values.
  void apply_env();

  std::string timestamp() const;
};

std::vector<gateway::MockRule> load_mock_rules(const std::filesystem::path& path);

/// Everything the pipeline needs, built once from the config.
struct Runtime {
  std::shared_ptr<gateway::Gateway> gw;
  ingest::TermDictionary dictionary;
  dims::CategoryLists categories;
  prompts::PromptCatalog catalog = prompts::PromptCatalog::defaults();
  completeness::HypothesisCatalog hypotheses = completeness::HypothesisCatalog::defaults();
  AppConfig cfg;
};

Runtime build_runtime(const AppConfig& cfg);

}  // namespace datadoc::config
