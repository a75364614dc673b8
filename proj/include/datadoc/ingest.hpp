#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "datadoc/gateway.hpp"
#include "datadoc/prompt_catalog.hpp"
#include "datadoc/retrieval.hpp"
#include "json.hpp"

namespace datadoc::ingest {

struct ParsedTable {
  std::string caption;
  std::vector<std::vector<std::string>> rows;
  std::string source_position = "unknown";
};

struct RawInput {
  std::string text;
  std::vector<ParsedTable> tables;
};

enum class PassageOrigin { Body, TableDerived };

struct Passage {
  int index = 0;
  std::string text;
  // Character span in the source text; table-derived passages are synthetic
  // and carry no span.
  std::size_t start = 0;
  std::size_t end = 0;
  PassageOrigin origin = PassageOrigin::Body;

  bool synthetic() const { return origin == PassageOrigin::TableDerived; }
};

/// canonical concept -> ordered surface terms; the first term is the default.
class TermDictionary {
 public:
  static TermDictionary defaults();
  static TermDictionary from_json(const nlohmann::json& j);

  void add(std::string concept_name, std::vector<std::string> terms);
  const std::vector<std::string>* find(std::string_view concept_name) const;
  const std::vector<std::pair<std::string, std::vector<std::string>>>& entries() const {
    return entries_;
  }
  bool empty() const { return entries_.empty(); }
  nlohmann::json to_json() const;

 private:
  std::vector<std::pair<std::string, std::vector<std::string>>> entries_;
};

struct TermProfile {
  std::map<std::string, std::string> chosen;               // concept -> surface term
  std::map<std::string, std::map<std::string, int>> counts;  // concept -> term -> count
};

struct SplitConfig {
  std::size_t target_len = 1000;
  std::size_t overlap = 100;
};

struct Document {
  std::string id;
  std::vector<Passage> passages;
  TermProfile term_profile;

  std::vector<std::string> passage_texts() const;
  size_t body_count() const;
};

/// Split by length with sentence-boundary snapping: each split point moves
/// forward to the next sentence end, so passages run at most one sentence
/// past `target_len`. Consecutive passages share `overlap` characters.
std::vector<Passage> split_passages(std::string_view text, std::size_t target_len,
                                    std::size_t overlap);

/// Whole-word, case-insensitive counts; ties resolve to the earlier
/// dictionary term, absence to the first (default) term.
TermProfile build_term_profile(const std::string& text, const TermDictionary& dict);

/// Substitute {concept} placeholders with the profile's chosen terms.
/// Unknown placeholders are an error naming the placeholder.
std::string tune_query(const std::string& tmpl, const TermProfile& profile);

/// Pipe-delimited serialization, first row treated as header.
std::string serialize_table(const ParsedTable& table);

/// Turn a table into a natural-language passage: retrieve the top-k body
/// passages for the caption, prompt the backend with table + context.
Passage contextualize_table(const ParsedTable& table, const std::vector<Passage>& body,
                            const retrieval::VectorIndex& body_index,
                            gateway::Gateway& gw, const prompts::PromptCatalog& catalog,
                            int k, int next_index);

std::string preprocessing_digest(const SplitConfig& split, const TermDictionary& dict);

/// Full preprocessing: split, term profile, table contextualization, id.
/// A body-passage index is built internally when tables are present;
/// tableless inputs perform no embedding or completion calls.
Document build_document(const RawInput& input, const TermDictionary& dict,
                        const SplitConfig& split, gateway::Gateway& gw,
                        const prompts::PromptCatalog& catalog, int k = 4);

}  // namespace datadoc::ingest
