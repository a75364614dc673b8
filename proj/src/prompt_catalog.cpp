#include "datadoc/prompt_catalog.hpp"

#include <fstream>
#include <stdexcept>

#include "datadoc/util.hpp"

namespace datadoc::prompts {

using nlohmann::json;

std::string substitute(const std::string& tmpl,
                       const std::map<std::string, std::string>& vars) {
  std::string out = tmpl;
  for (const auto& [name, value] : vars) {
    const std::string needle = "{" + name + "}";
    size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  return out;
}

PromptCatalog::PromptCatalog(std::map<std::string, std::string> templates)
    : templates_(std::move(templates)) {
  json j(templates_);
  digest_ = util::sha256_hex(j.dump());
}

PromptCatalog PromptCatalog::defaults() {
  std::map<std::string, std::string> t;
  t["default.in_context"] =
      "Answer the question using only the context below. If the context does not "
      "contain the answer, reply exactly {sentinel}.\n\nContext:\n{context}\n\n"
      "Question: {query}\nAnswer:";
  t["default.refine"] =
      "Refine the following answer with the additional context. Keep every detail that "
      "is still supported and add what the new context contributes.\n\n"
      "Answer:\n{answer}\n\nAdditional context:\n{context}\n\nRefined answer:";
  t["default.classify"] =
      "Classify the provided answer into one of these categories: {categories}.\n"
      "Reply with the category name only.\n\nAnswer: {answer}\nCategory:";
  t["default.classify_retry"] =
      "The previous reply was not one of the allowed categories. You must answer with "
      "exactly one of: {categories}. Nothing else.\n\nAnswer: {answer}\nCategory:";
  t["default.parse"] =
      "From the following answer, list each {entity} separated by '{separator}'; output "
      "nothing else. If there are none, output nothing.\n\nAnswer: {answer}\nList:";
  t["default.open_domain"] = "{query}";
  t["default.summarize"] =
      "Summarize the following in at most {max_sentences} sentences.\n\n{answer}\n\n"
      "Summary:";
  t["default.table_context"] =
      "Rewrite the table below as a short natural-language explanation, using the "
      "context passages to link it to the document.\n\nTable:\n{table}\n\n"
      "Context:\n{context}\n\nExplanation:";
  return PromptCatalog(std::move(t));
}

PromptCatalog PromptCatalog::from_json(const json& j) {
  if (!j.is_object()) throw std::runtime_error("prompt catalog must be a JSON object");
  // Missing default.* entries fall back to the built-in wording.
  PromptCatalog base = defaults();
  std::map<std::string, std::string> t = base.templates_;
  for (const auto& [key, value] : j.items()) {
    if (!value.is_string()) {
      throw std::runtime_error("prompt catalog entry '" + key + "' is not a string");
    }
    t[key] = value.get<std::string>();
  }
  return PromptCatalog(std::move(t));
}

PromptCatalog PromptCatalog::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open prompt catalog: " + path.string());
  json j;
  in >> j;
  return from_json(j);
}

std::string PromptCatalog::render(const std::string& dimension, const std::string& step_id,
                                  const std::string& step_type,
                                  const std::map<std::string, std::string>& vars) const {
  auto it = templates_.find(dimension + "." + step_id);
  if (it == templates_.end()) it = templates_.find("default." + step_type);
  if (it == templates_.end()) {
    throw std::runtime_error("no prompt template for step type '" + step_type + "'");
  }
  return substitute(it->second, vars);
}

json PromptCatalog::to_json() const { return json(templates_); }

}  // namespace datadoc::prompts
