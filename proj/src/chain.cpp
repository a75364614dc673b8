#include "datadoc/chain.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <stdexcept>

#include "datadoc/util.hpp"

namespace datadoc::chain {

namespace {

struct IdVisitor {
  const std::string& operator()(const InContextStep& s) const { return s.id; }
  const std::string& operator()(const RefineStep& s) const { return s.id; }
  const std::string& operator()(const ClassifyStep& s) const { return s.id; }
  const std::string& operator()(const ParseStep& s) const { return s.id; }
  const std::string& operator()(const OpenDomainStep& s) const { return s.id; }
  const std::string& operator()(const SummarizeStep& s) const { return s.id; }
  const std::string& operator()(const BranchStep& s) const { return s.id; }
};

struct TypeVisitor {
  std::string operator()(const InContextStep&) const { return "in_context"; }
  std::string operator()(const RefineStep&) const { return "refine"; }
  std::string operator()(const ClassifyStep&) const { return "classify"; }
  std::string operator()(const ParseStep&) const { return "parse"; }
  std::string operator()(const OpenDomainStep&) const { return "open_domain"; }
  std::string operator()(const SummarizeStep&) const { return "summarize"; }
  std::string operator()(const BranchStep&) const { return "branch"; }
};

}  // namespace

const std::string& step_id(const StepSpec& step) { return std::visit(IdVisitor{}, step); }
std::string step_type(const StepSpec& step) { return std::visit(TypeVisitor{}, step); }

// ---------------------------------------------------------------------------
// validation

namespace {

void validate_steps(const std::vector<StepSpec>& steps, std::vector<std::string>& ids,
                    const std::string& dimension) {
  for (size_t i = 0; i < steps.size(); ++i) {
    const StepSpec& step = steps[i];
    const std::string& id = step_id(step);
    if (id.empty()) throw std::invalid_argument(dimension + ": step with empty id");
    if (std::find(ids.begin(), ids.end(), id) != ids.end()) {
      throw std::invalid_argument(dimension + ": duplicate step id '" + id + "'");
    }
    auto require_earlier = [&](const std::string& ref, bool optional) {
      if (ref.empty()) {
        if (optional) return;
        throw std::invalid_argument(dimension + ": step '" + id + "' needs an input_ref");
      }
      if (std::find(ids.begin(), ids.end(), ref) == ids.end()) {
        throw std::invalid_argument(dimension + ": step '" + id + "' references '" + ref +
                                    "' which is not an earlier step");
      }
    };
    if (const auto* s = std::get_if<InContextStep>(&step)) {
      require_earlier(s->input_ref, true);
      if (s->k < 1) throw std::invalid_argument(dimension + ": k must be >= 1");
    } else if (const auto* s = std::get_if<RefineStep>(&step)) {
      require_earlier(s->input_ref, false);
      if (s->max_rounds < 1) {
        throw std::invalid_argument(dimension + ": max_rounds must be >= 1");
      }
    } else if (const auto* s = std::get_if<ClassifyStep>(&step)) {
      require_earlier(s->input_ref, false);
      if (s->categories.empty()) {
        throw std::invalid_argument(dimension + ": classify '" + id +
                                    "' has no categories");
      }
    } else if (const auto* s = std::get_if<ParseStep>(&step)) {
      require_earlier(s->input_ref, false);
      if (s->item_separator.empty()) {
        throw std::invalid_argument(dimension + ": parse '" + id +
                                    "' has an empty separator");
      }
    } else if (const auto* s = std::get_if<OpenDomainStep>(&step)) {
      require_earlier(s->input_ref, true);
    } else if (const auto* s = std::get_if<SummarizeStep>(&step)) {
      require_earlier(s->input_ref, false);
    } else if (const auto* s = std::get_if<BranchStep>(&step)) {
      require_earlier(s->input_ref, false);
      ids.push_back(id);
      validate_steps(s->subchain, ids, dimension);
      continue;
    }
    ids.push_back(id);
  }
}

}  // namespace

void ChainSpec::validate() const {
  std::vector<std::string> ids;
  validate_steps(steps, ids, dimension);
  for (const auto& [field, target] : output_map) {
    if (std::find(ids.begin(), ids.end(), target) == ids.end()) {
      throw std::invalid_argument(dimension + ": output_map field '" + field +
                                  "' targets unknown step '" + target + "'");
    }
  }
}

const StepOutput* ChainResult::find(const std::string& id) const {
  for (const auto& out : outputs) {
    if (out.id == id) return &out;
  }
  return nullptr;
}

// ---------------------------------------------------------------------------
// category normalization

std::string normalize_category(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool last_space = true;
  for (char c : raw) {
    const unsigned char uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc) || c == '-' || c == '_') {
      out.push_back(static_cast<char>(std::tolower(uc)));
      last_space = false;
    } else if (!last_space) {
      out.push_back(' ');
      last_space = true;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

// ---------------------------------------------------------------------------
// ChainEngine

ChainEngine::ChainEngine(const ingest::Document& doc, const retrieval::VectorIndex& index,
                         gateway::Gateway& gw, const prompts::PromptCatalog& catalog,
                         ChainConfig config)
    : doc_(doc), index_(index), gw_(gw), catalog_(catalog), config_(std::move(config)) {}

std::string ChainEngine::complete(const std::string& dimension, const std::string& step,
                                  const std::string& prompt) {
  gateway::CompletionRequest req;
  req.prompt = prompt;
  req.tag = dimension + "/" + step;
  return gw_.complete(req).text;
}

std::string ChainEngine::context_for(const std::vector<retrieval::RetrievalHit>& hits) const {
  std::string context;
  for (const auto& hit : hits) {
    context += doc_.passages[static_cast<size_t>(hit.passage_index)].text;
    context += "\n---\n";
  }
  return context;
}

StepOutput ChainEngine::run_in_context(const std::string& dimension,
                                       const InContextStep& step,
                                       const std::map<std::string, StepOutput>& prior,
                                       std::set<int>& seen) {
  StepOutput out;
  out.id = step.id;

  auto ask = [&](const std::string& raw_query) -> std::pair<std::string, std::vector<int>> {
    const std::string query = ingest::tune_query(raw_query, doc_.term_profile);
    const auto qvec = retrieval::embed(gw_, query, dimension + "/" + step.id);
    const auto hits = retrieval::top_k(index_, qvec, step.k);
    const std::string prompt =
        catalog_.render(dimension, step.id, "in_context",
                        {{"context", context_for(hits)},
                         {"query", query},
                         {"sentinel", step.not_found_sentinel}});
    std::vector<int> refs;
    for (const auto& h : hits) refs.push_back(h.passage_index);
    return {complete(dimension, step.id, prompt), refs};
  };

  if (step.input_ref.empty()) {
    auto [answer, refs] = ask(step.query_template);
    out.text = answer;
    out.kind = answer == step.not_found_sentinel ? OutputKind::NotFound : OutputKind::Found;
    out.evidence = refs;
    for (int r : refs) seen.insert(r);
    return out;
  }

  // Per-entity fan-out over an earlier parse step.
  const StepOutput& input = prior.at(step.input_ref);
  if (input.kind != OutputKind::Entities || input.entities.empty()) {
    out.kind = OutputKind::NotFound;
    out.text = step.not_found_sentinel;
    out.short_circuit = true;
    return out;
  }
  std::string combined;
  bool any_found = false;
  for (const auto& entity : input.entities) {
    const std::string raw = prompts::substitute(step.query_template, {{"entity", entity}});
    auto [answer, refs] = ask(raw);
    out.evidence.insert(out.evidence.end(), refs.begin(), refs.end());
    for (int r : refs) seen.insert(r);
    if (answer == step.not_found_sentinel) continue;
    any_found = true;
    if (!combined.empty()) combined += "\n";
    combined += entity + ": " + answer;
  }
  std::sort(out.evidence.begin(), out.evidence.end());
  out.evidence.erase(std::unique(out.evidence.begin(), out.evidence.end()),
                     out.evidence.end());
  out.text = any_found ? combined : step.not_found_sentinel;
  out.kind = any_found ? OutputKind::Found : OutputKind::NotFound;
  return out;
}

StepOutput ChainEngine::run_refine(const std::string& dimension, const RefineStep& step,
                                   const StepOutput& prev, std::set<int>& seen) {
  StepOutput out;
  out.id = step.id;
  if (prev.kind != OutputKind::Found) {
    out.kind = OutputKind::NotFound;
    out.text = prev.text;
    out.short_circuit = true;
    return out;
  }
  std::string answer = prev.text;
  int rounds = 0;
  while (rounds < step.max_rounds) {
    const auto qvec = retrieval::embed(gw_, answer, dimension + "/" + step.id);
    const auto hits = retrieval::top_k(index_, qvec, step.k);
    std::vector<retrieval::RetrievalHit> fresh;
    for (const auto& h : hits) {
      if (!seen.contains(h.passage_index)) fresh.push_back(h);
    }
    if (fresh.empty()) break;  // the new context is no longer useful
    const std::string prompt = catalog_.render(
        dimension, step.id, "refine",
        {{"answer", answer}, {"context", context_for(fresh)}});
    answer = complete(dimension, step.id, prompt);
    ++rounds;
    for (const auto& h : fresh) {
      seen.insert(h.passage_index);
      out.evidence.push_back(h.passage_index);
    }
  }
  out.kind = OutputKind::Found;
  out.text = answer;
  out.rounds = rounds;
  // Refined answers remain grounded in the passages the original answer used.
  std::vector<int> merged = prev.evidence;
  merged.insert(merged.end(), out.evidence.begin(), out.evidence.end());
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  out.evidence = std::move(merged);
  return out;
}

StepOutput ChainEngine::run_classify(const std::string& dimension, const ClassifyStep& step,
                                     const StepOutput& input) {
  StepOutput out;
  out.id = step.id;
  out.kind = OutputKind::Category;
  if (input.kind != OutputKind::Found) {
    out.category = "unknown";
    out.short_circuit = true;
    return out;
  }
  std::string categories;
  for (size_t i = 0; i < step.categories.size(); ++i) {
    if (i) categories += ", ";
    categories += step.categories[i];
  }
  auto match = [&](const std::string& reply) -> std::optional<std::string> {
    const std::string norm = normalize_category(reply);
    for (const auto& cat : step.categories) {
      if (normalize_category(cat) == norm) return cat;
    }
    return std::nullopt;
  };

  std::string prompt =
      catalog_.render(dimension, step.id, "classify",
                      {{"categories", categories}, {"answer", input.text}});
  for (int attempt = 0; attempt <= config_.classify_retries; ++attempt) {
    const std::string reply = complete(dimension, step.id, prompt);
    if (auto category = match(reply)) {
      out.category = *category;
      out.text = *category;
      out.evidence = input.evidence;
      return out;
    }
    prompt = catalog_.render(dimension, step.id, "classify_retry",
                             {{"categories", categories}, {"answer", input.text}});
  }
  out.category = "unknown";
  out.text = "unknown";
  out.evidence = input.evidence;
  return out;
}

StepOutput ChainEngine::run_parse(const std::string& dimension, const ParseStep& step,
                                  const StepOutput& input) {
  StepOutput out;
  out.id = step.id;
  out.kind = OutputKind::Entities;
  if (input.kind != OutputKind::Found) {
    out.short_circuit = true;
    return out;
  }
  const std::string prompt = catalog_.render(
      dimension, step.id, "parse",
      {{"entity", step.entity_name}, {"separator", step.item_separator},
       {"answer", input.text}});
  const std::string reply = complete(dimension, step.id, prompt);
  for (const auto& part : util::split_on(reply, step.item_separator)) {
    std::string item = util::trim(part);
    if (!item.empty()) out.entities.push_back(std::move(item));
  }
  out.evidence = input.evidence;
  return out;
}

StepOutput ChainEngine::run_open_domain(const std::string& dimension,
                                        const OpenDomainStep& step,
                                        const std::map<std::string, StepOutput>& prior) {
  StepOutput out;
  out.id = step.id;
  out.open_domain = true;

  auto ask = [&](const std::string& query) {
    const std::string prompt =
        catalog_.render(dimension, step.id, "open_domain", {{"query", query}});
    return complete(dimension, step.id, prompt);
  };

  if (step.input_ref.empty()) {
    out.text = ask(step.query_template);
    out.kind = OutputKind::Found;
    return out;
  }
  const StepOutput& input = prior.at(step.input_ref);
  if (input.kind != OutputKind::Entities || input.entities.empty()) {
    out.kind = OutputKind::NotFound;
    out.short_circuit = true;
    return out;
  }
  std::string combined;
  for (const auto& entity : input.entities) {
    const std::string query =
        prompts::substitute(step.query_template, {{"entity", entity}});
    if (!combined.empty()) combined += "\n";
    combined += entity + ": " + ask(query);
  }
  out.text = combined;
  out.kind = OutputKind::Found;
  return out;
}

StepOutput ChainEngine::run_summarize(const std::string& dimension,
                                      const SummarizeStep& step, const StepOutput& input) {
  StepOutput out;
  out.id = step.id;
  if (input.kind != OutputKind::Found) {
    out.kind = OutputKind::NotFound;
    out.text = input.text;
    out.short_circuit = true;
    return out;
  }
  const std::string prompt = catalog_.render(
      dimension, step.id, "summarize",
      {{"answer", input.text}, {"max_sentences", std::to_string(step.max_sentences)}});
  out.text = complete(dimension, step.id, prompt);
  out.kind = OutputKind::Found;
  out.evidence = input.evidence;
  return out;
}

bool ChainEngine::run_steps(const std::string& dimension,
                            const std::vector<StepSpec>& steps,
                            std::map<std::string, StepOutput>& prior, std::set<int>& seen,
                            ChainResult& result) {
  for (const StepSpec& step : steps) {
    StepOutput out;
    try {
      if (const auto* s = std::get_if<InContextStep>(&step)) {
        out = run_in_context(dimension, *s, prior, seen);
      } else if (const auto* s = std::get_if<RefineStep>(&step)) {
        out = run_refine(dimension, *s, prior.at(s->input_ref), seen);
      } else if (const auto* s = std::get_if<ClassifyStep>(&step)) {
        out = run_classify(dimension, *s, prior.at(s->input_ref));
      } else if (const auto* s = std::get_if<ParseStep>(&step)) {
        out = run_parse(dimension, *s, prior.at(s->input_ref));
      } else if (const auto* s = std::get_if<OpenDomainStep>(&step)) {
        out = run_open_domain(dimension, *s, prior);
      } else if (const auto* s = std::get_if<SummarizeStep>(&step)) {
        out = run_summarize(dimension, *s, prior.at(s->input_ref));
      } else if (const auto* s = std::get_if<BranchStep>(&step)) {
        const StepOutput& input = prior.at(s->input_ref);
        if (input.kind == OutputKind::Category && input.category == s->match_category) {
          if (!run_steps(dimension, s->subchain, prior, seen, result)) return false;
        }
        continue;
      }
    } catch (const std::exception& e) {
      result.error = ChainError{step_id(step), e.what()};
      return false;
    }
    prior[out.id] = out;
    result.outputs.push_back(std::move(out));
  }
  return true;
}

ChainResult ChainEngine::run_chain(const ChainSpec& chain) {
  chain.validate();
  ChainResult result;
  std::map<std::string, StepOutput> prior;
  std::set<int> seen;
  const size_t calls_before = gw_.call_log().size();
  const auto start = std::chrono::steady_clock::now();
  run_steps(chain.dimension, chain.steps, prior, seen, result);
  result.total_latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
          .count();
  result.gateway_calls = static_cast<int>(gw_.call_log().size() - calls_before);
  return result;
}

}  // namespace datadoc::chain
