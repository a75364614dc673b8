#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "datadoc/gateway.hpp"
#include "datadoc/ingest.hpp"
#include "datadoc/prompt_catalog.hpp"
#include "datadoc/retrieval.hpp"

namespace datadoc::chain {

// Step variants. `input_ref` always names an earlier step of the same chain.
// InContext/OpenDomain steps with a non-empty input_ref fan out once per
// entity of the referenced parse output, substituting {entity} in the query.

struct InContextStep {
  std::string id;
  std::string query_template;
  int k = 4;
  std::string not_found_sentinel = "NOT_FOUND";
  std::string input_ref;  // optional, per-entity fan-out
};

struct RefineStep {
  std::string id;
  std::string input_ref;  // the InContext step whose answer is refined
  int k = 4;
  int max_rounds = 3;
};

struct ClassifyStep {
  std::string id;
  std::string input_ref;
  std::vector<std::string> categories;
};

struct ParseStep {
  std::string id;
  std::string input_ref;
  std::string entity_name;
  std::string item_separator = ";";
};

struct OpenDomainStep {
  std::string id;
  std::string query_template;
  std::string input_ref;  // optional, per-entity fan-out
};

struct SummarizeStep {
  std::string id;
  std::string input_ref;
  int max_sentences = 3;
};

struct BranchStep;

using StepSpec = std::variant<InContextStep, RefineStep, ClassifyStep, ParseStep,
                              OpenDomainStep, SummarizeStep, BranchStep>;

struct BranchStep {
  std::string id;
  std::string input_ref;       // a Classify step
  std::string match_category;  // subchain runs iff the category matches
  std::vector<StepSpec> subchain;
};

const std::string& step_id(const StepSpec& step);
std::string step_type(const StepSpec& step);

struct ChainSpec {
  std::string dimension;
  std::vector<StepSpec> steps;
  std::map<std::string, std::string> output_map;  // field -> step id

  /// Enforces: unique step ids, input_refs point to earlier steps,
  /// Classify categories non-empty, Refine follows an InContext step,
  /// max_rounds >= 1, output_map targets exist.
  void validate() const;
};

enum class OutputKind { Found, NotFound, Category, Entities };

struct StepOutput {
  std::string id;
  std::string text;
  OutputKind kind = OutputKind::Found;
  std::string category;                // Category outputs
  std::vector<std::string> entities;   // Entities outputs
  std::vector<int> evidence;           // passage refs used in context
  int rounds = 0;                      // Refine only
  bool open_domain = false;
  bool short_circuit = false;  // produced without information (not_found input)
};

struct ChainError {
  std::string step_id;
  std::string message;
};

struct ChainResult {
  std::vector<StepOutput> outputs;  // one per executed step, in order
  double total_latency_ms = 0.0;
  int gateway_calls = 0;
  std::optional<ChainError> error;

  const StepOutput* find(const std::string& id) const;
};

struct ChainConfig {
  std::string sentinel = "NOT_FOUND";
  int classify_retries = 1;
};

/// Executes one chain over an immutable document + index. Step runners are
/// public so tests can drive them directly.
class ChainEngine {
 public:
  ChainEngine(const ingest::Document& doc, const retrieval::VectorIndex& index,
              gateway::Gateway& gw, const prompts::PromptCatalog& catalog,
              ChainConfig config = {});

  ChainResult run_chain(const ChainSpec& chain);

  // Individual runners. `prior` holds earlier step outputs; `seen` is the
  // chain's accumulated evidence set (updated in place).
  StepOutput run_in_context(const std::string& dimension, const InContextStep& step,
                            const std::map<std::string, StepOutput>& prior,
                            std::set<int>& seen);
  StepOutput run_refine(const std::string& dimension, const RefineStep& step,
                        const StepOutput& prev, std::set<int>& seen);
  StepOutput run_classify(const std::string& dimension, const ClassifyStep& step,
                          const StepOutput& input);
  StepOutput run_parse(const std::string& dimension, const ParseStep& step,
                       const StepOutput& input);
  StepOutput run_open_domain(const std::string& dimension, const OpenDomainStep& step,
                             const std::map<std::string, StepOutput>& prior);
  StepOutput run_summarize(const std::string& dimension, const SummarizeStep& step,
                           const StepOutput& input);

  const ChainConfig& config() const { return config_; }

 private:
  std::string complete(const std::string& dimension, const std::string& step,
                       const std::string& prompt);
  std::string context_for(const std::vector<retrieval::RetrievalHit>& hits) const;
  // Returns false when a step failed and the chain must abort.
  bool run_steps(const std::string& dimension, const std::vector<StepSpec>& steps,
                 std::map<std::string, StepOutput>& prior, std::set<int>& seen,
                 ChainResult& result);

  const ingest::Document& doc_;
  const retrieval::VectorIndex& index_;
  gateway::Gateway& gw_;
  const prompts::PromptCatalog& catalog_;
  ChainConfig config_;
};

/// Lowercase, strip punctuation, collapse whitespace; used to contain
/// free-text classifier replies.
std::string normalize_category(std::string_view raw);

}  // namespace datadoc::chain
