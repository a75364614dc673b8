#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "datadoc/chain.hpp"
#include "json.hpp"

namespace datadoc::dims {

inline constexpr std::array<const char*, 7> kDimensions = {
    "uses",      "contributors", "distribution",    "composition",
    "gathering", "annotation",   "social_concerns"};

bool is_dimension(const std::string& name);

/// Category vocabularies used by the Classify and OpenDomain steps.
struct CategoryLists {
  std::vector<std::string> ml_tasks;
  std::vector<std::string> funder_types;
  std::vector<std::string> gathering_team_types;
  std::vector<std::string> annotation_team_types;
  std::vector<std::string> gathering_process_types;
  std::vector<std::string> annotation_process_types;

  static CategoryLists defaults();
  static CategoryLists from_json(const nlohmann::json& j);
  void validate() const;  // non-empty, lowercase, duplicate-free
};

struct ExtractedField {
  enum class Kind { Text, Category, Entities };
  std::string name;
  Kind kind = Kind::Text;
  std::string text;                   // Text / Category value
  std::vector<std::string> entities;  // Entities value
  bool found = false;
  std::vector<int> evidence;
  bool open_domain = false;
};

struct ExtractionMeta {
  std::string model;
  std::string catalog_digest;
  std::string timestamp;
};

struct DimensionRecord {
  std::string dimension;
  std::vector<ExtractedField> fields;
  std::string document_id;
  ExtractionMeta meta;
  std::optional<std::string> error;  // set when the chain aborted

  nlohmann::json to_json() const;
  const ExtractedField* find(const std::string& name) const;
};

/// The per-dimension output schema, in stable serialization order.
const std::vector<std::string>& schema_fields(const std::string& dimension);

/// The static chain composition for a dimension. Validated on build.
chain::ChainSpec chain_for(const std::string& dimension, const CategoryLists& cats);

DimensionRecord extract_dimension(chain::ChainEngine& engine, const std::string& dimension,
                                  const CategoryLists& cats, const std::string& document_id,
                                  const ExtractionMeta& meta);

/// One record per dimension; a failure in one dimension does not stop the
/// others.
std::vector<DimensionRecord> extract_all(chain::ChainEngine& engine,
                                         const CategoryLists& cats,
                                         const std::string& document_id,
                                         const ExtractionMeta& meta);

}  // namespace datadoc::dims
