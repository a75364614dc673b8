#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "datadoc/completeness.hpp"
#include "datadoc/config.hpp"
#include "datadoc/dimensions.hpp"
#include "datadoc/ingest.hpp"
#include "datadoc/retrieval.hpp"
#include "json.hpp"

namespace datadoc::pipeline {

/// Digest of (normalized text, preprocessing config, prompt-catalog digest,
/// embedder id). Any config change that affects preprocessing yields a new
/// key, so stale entries are never reused across configs.
std::string cache_key(const std::string& text, const ingest::SplitConfig& split,
                      const ingest::TermDictionary& dict, const std::string& catalog_digest,
                      const std::string& embedder_id);

struct PreparedDocument {
  ingest::Document doc;
  retrieval::VectorIndex index;
  bool cache_hit = false;
};

nlohmann::json to_json(const ingest::Document& doc, const retrieval::VectorIndex& index);
PreparedDocument from_json(const nlohmann::json& j);

/// Content-addressed on-disk store of preprocessed documents. One JSON file
/// per key; writes go through a temp file and an atomic rename. Entries
/// older than `max_age_days` are dropped on construction.
class DocumentCache {
 public:
  explicit DocumentCache(std::filesystem::path dir, int max_age_days = 30);

  std::optional<PreparedDocument> get(const std::string& key) const;
  void put(const std::string& key, const ingest::Document& doc,
           const retrieval::VectorIndex& index);
  size_t size() const;

 private:
  std::filesystem::path entry_path(const std::string& key) const;

  std::filesystem::path dir_;
};

/// Cache-aware preprocessing + per-dimension extraction.
class Pipeline {
 public:
  explicit Pipeline(config::Runtime& rt);

  PreparedDocument prepare(const ingest::RawInput& input);
  dims::DimensionRecord analyze(const PreparedDocument& prepared,
                                const std::string& dimension);
  std::vector<dims::DimensionRecord> analyze_all(const PreparedDocument& prepared);
  completeness::CompletenessReport report(
      const std::vector<dims::DimensionRecord>& records);

 private:
  dims::ExtractionMeta meta() const;

  config::Runtime& rt_;
  std::optional<DocumentCache> cache_;
};

ingest::RawInput load_raw_input(const std::filesystem::path& text_path,
                                const std::filesystem::path& tables_path);

/// The CLI's `analyze` body, shared with tests. Writes records + report
/// JSON to `out`. Returns 0 on success, 2 when any dimension failed
/// partially, 1 on fatal error (message on stderr).
int run_analyze(const config::AppConfig& cfg, const std::filesystem::path& input,
                const std::filesystem::path& tables, const std::string& dimension,
                const std::filesystem::path& out);

}  // namespace datadoc::pipeline
