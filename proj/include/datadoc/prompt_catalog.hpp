#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "json.hpp"

namespace datadoc::prompts {

/// Versioned prompt templates. Lookup order: "<dimension>.<step_id>",
/// then "default.<step_type>". Placeholders ({query}, {context}, {answer},
/// {categories}, {entity}, {separator}, {sentinel}, {max_sentences},
/// {table}) are substituted at render time; unknown placeholders are left
/// in place so templates can carry literal braces.
class PromptCatalog {
 public:
  static PromptCatalog defaults();
  static PromptCatalog from_json(const nlohmann::json& j);
  static PromptCatalog from_file(const std::filesystem::path& path);

  /// SHA-256 of the canonical JSON dump; part of the document cache key.
  const std::string& digest() const { return digest_; }

  std::string render(const std::string& dimension, const std::string& step_id,
                     const std::string& step_type,
                     const std::map<std::string, std::string>& vars) const;

  nlohmann::json to_json() const;

 private:
  explicit PromptCatalog(std::map<std::string, std::string> templates);

  std::map<std::string, std::string> templates_;
  std::string digest_;
};

/// Substitute {name} occurrences for every pair in `vars`.
std::string substitute(const std::string& tmpl,
                       const std::map<std::string, std::string>& vars);

}  // namespace datadoc::prompts
