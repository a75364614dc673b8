#include "datadoc/ingest.hpp"

#include <algorithm>
#include <cctype>
#include <stdexcept>

#include "datadoc/util.hpp"

namespace datadoc::ingest {

using nlohmann::json;

// ---------------------------------------------------------------------------
// TermDictionary

TermDictionary TermDictionary::defaults() {
  TermDictionary d;
  d.add("gathering", {"gathering", "collection", "acquisition"});
  d.add("annotation", {"annotation", "labeling", "labelling", "tagging"});
  return d;
}

void TermDictionary::add(std::string concept_name, std::vector<std::string> terms) {
  if (terms.empty()) {
    throw std::invalid_argument("dictionary entry '" + concept_name + "' has no terms");
  }
  std::vector<std::string> lowered;
  lowered.reserve(terms.size());
  for (const auto& t : terms) {
    std::string lt = util::to_lower(t);
    if (std::find(lowered.begin(), lowered.end(), lt) != lowered.end()) {
      throw std::invalid_argument("duplicate term '" + lt + "' in entry '" +
                                  concept_name + "'");
    }
    lowered.push_back(std::move(lt));
  }
  entries_.emplace_back(std::move(concept_name), std::move(lowered));
}

const std::vector<std::string>* TermDictionary::find(std::string_view concept_name) const {
  for (const auto& [name, terms] : entries_) {
    if (name == concept_name) return &terms;
  }
  return nullptr;
}

TermDictionary TermDictionary::from_json(const json& j) {
  if (!j.is_object()) throw std::runtime_error("term dictionary must be a JSON object");
  TermDictionary d;
  for (const auto& [concept_name, terms] : j.items()) {
    if (!terms.is_array()) {
      throw std::runtime_error("term dictionary entry '" + concept_name +
                               "' must be an array");
    }
    d.add(concept_name, terms.get<std::vector<std::string>>());
  }
  return d;
}

json TermDictionary::to_json() const {
  json j = json::object();
  for (const auto& [name, terms] : entries_) j[name] = terms;
  return j;
}

// ---------------------------------------------------------------------------
// split_passages

namespace {

// First position p > from such that text[p-1] ends a sentence, or npos.
size_t next_sentence_end(std::string_view text, size_t from) {
  for (size_t i = from; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '.' || c == '!' || c == '?') {
      if (i + 1 == text.size() ||
          std::isspace(static_cast<unsigned char>(text[i + 1]))) {
        return i + 1;
      }
    } else if (c == '\n') {
      return i + 1;
    }
  }
  return std::string_view::npos;
}

}  // namespace

std::vector<Passage> split_passages(std::string_view text, std::size_t target_len,
                                    std::size_t overlap) {
  if (target_len <= overlap) {
    throw std::invalid_argument("target_len must exceed overlap");
  }
  std::vector<Passage> passages;
  if (text.empty()) return passages;

  size_t start = 0;
  int index = 0;
  while (start < text.size()) {
    size_t end = start + target_len;
    if (end >= text.size()) {
      end = text.size();
    } else {
      const size_t snapped = next_sentence_end(text, end);
      end = snapped == std::string_view::npos ? text.size() : snapped;
    }
    Passage p;
    p.index = index++;
    p.start = start;
    p.end = end;
    p.text = std::string(text.substr(start, end - start));
    p.origin = PassageOrigin::Body;
    passages.push_back(std::move(p));
    if (end == text.size()) break;
    start = end - overlap;
  }
  return passages;
}

// ---------------------------------------------------------------------------
// term profile / query tuning

TermProfile build_term_profile(const std::string& text, const TermDictionary& dict) {
  if (dict.empty()) throw std::invalid_argument("term dictionary is empty");
  TermProfile profile;
  for (const auto& [concept_name, terms] : dict.entries()) {
    std::string best = terms.front();
    int best_count = -1;
    for (const auto& term : terms) {
      const int count = util::whole_word_count(text, term);
      profile.counts[concept_name][term] = count;
      if (count > best_count) {  // strict: ties keep the earlier term
        best_count = count;
        best = term;
      }
    }
    profile.chosen[concept_name] = best;
  }
  return profile;
}

std::string tune_query(const std::string& tmpl, const TermProfile& profile) {
  std::string out;
  out.reserve(tmpl.size());
  size_t pos = 0;
  while (pos < tmpl.size()) {
    const size_t open = tmpl.find('{', pos);
    if (open == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    const size_t close = tmpl.find('}', open);
    if (close == std::string::npos) {
      out.append(tmpl, pos, std::string::npos);
      break;
    }
    out.append(tmpl, pos, open - pos);
    const std::string name = tmpl.substr(open + 1, close - open - 1);
    auto it = profile.chosen.find(name);
    if (it == profile.chosen.end()) {
      throw std::invalid_argument("unknown query placeholder '{" + name + "}'");
    }
    out += it->second;
    pos = close + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------
// tables

std::string serialize_table(const ParsedTable& table) {
  std::string out = table.caption + "\n";
  for (size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    for (size_t c = 0; c < row.size(); ++c) {
      if (c) out += " | ";
      out += row[c];
    }
    out += "\n";
    if (r == 0 && table.rows.size() > 1) {
      for (size_t c = 0; c < row.size(); ++c) {
        if (c) out += " | ";
        out += "---";
      }
      out += "\n";
    }
  }
  return out;
}

Passage contextualize_table(const ParsedTable& table, const std::vector<Passage>& body,
                            const retrieval::VectorIndex& body_index,
                            gateway::Gateway& gw, const prompts::PromptCatalog& catalog,
                            int k, int next_index) {
  if (table.rows.empty()) throw std::invalid_argument("empty table");
  const std::string caption =
      table.caption.empty() ? "table" : table.caption;
  const auto query_vec = retrieval::embed(gw, caption, "table:" + caption);
  const auto hits = retrieval::top_k(body_index, query_vec, k);

  std::string context;
  for (const auto& hit : hits) {
    context += body[static_cast<size_t>(hit.passage_index)].text;
    context += "\n---\n";
  }
  const std::string prompt = catalog.render(
      "ingest", "table_context", "table_context",
      {{"table", serialize_table(table)}, {"context", context}});
  gateway::CompletionRequest req;
  req.prompt = prompt;
  req.tag = "ingest/table:" + caption;
  gateway::CompletionResult result;
  try {
    result = gw.complete(req);
  } catch (const gateway::BackendError& e) {
    throw std::runtime_error("table contextualization '" + caption +
                             "' failed: " + e.what());
  }

  Passage p;
  p.index = next_index;
  p.text = result.text;
  p.origin = PassageOrigin::TableDerived;
  return p;
}

// ---------------------------------------------------------------------------
// build_document

std::string preprocessing_digest(const SplitConfig& split, const TermDictionary& dict) {
  json j = {{"target_len", split.target_len},
            {"overlap", split.overlap},
            {"dictionary", dict.to_json()}};
  return util::sha256_hex(j.dump());
}

Document build_document(const RawInput& input, const TermDictionary& dict,
                        const SplitConfig& split, gateway::Gateway& gw,
                        const prompts::PromptCatalog& catalog, int k) {
  Document doc;
  doc.passages = split_passages(input.text, split.target_len, split.overlap);
  doc.term_profile = build_term_profile(input.text, dict);
  doc.id = util::sha256_hex(util::normalize_text(input.text) + "\n" +
                            preprocessing_digest(split, dict));

  if (!input.tables.empty()) {
    std::vector<std::string> body_texts;
    body_texts.reserve(doc.passages.size());
    for (const auto& p : doc.passages) body_texts.push_back(p.text);
    const auto body_index = retrieval::build_index(body_texts, gw);
    int next = static_cast<int>(doc.passages.size());
    for (size_t i = 0; i < input.tables.size(); ++i) {
      ParsedTable table = input.tables[i];
      if (table.caption.empty()) table.caption = "table-" + std::to_string(i);
      doc.passages.push_back(
          contextualize_table(table, doc.passages, body_index, gw, catalog, k, next++));
    }
  }
  return doc;
}

std::vector<std::string> Document::passage_texts() const {
  std::vector<std::string> texts;
  texts.reserve(passages.size());
  for (const auto& p : passages) texts.push_back(p.text);
  return texts;
}

size_t Document::body_count() const {
  size_t n = 0;
  for (const auto& p : passages) {
    if (p.origin == PassageOrigin::Body) ++n;
  }
  return n;
}

}  // namespace datadoc::ingest
