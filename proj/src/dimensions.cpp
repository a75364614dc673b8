#include "datadoc/dimensions.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "datadoc/util.hpp"

namespace datadoc::dims {

using chain::BranchStep;
using chain::ChainSpec;
using chain::ClassifyStep;
using chain::InContextStep;
using chain::OpenDomainStep;
using chain::ParseStep;
using chain::RefineStep;
using chain::StepSpec;
using chain::SummarizeStep;
using nlohmann::json;

bool is_dimension(const std::string& name) {
  return std::find_if(kDimensions.begin(), kDimensions.end(),
                      [&](const char* d) { return name == d; }) != kDimensions.end();
}

// ---------------------------------------------------------------------------
// CategoryLists

CategoryLists CategoryLists::defaults() {
  CategoryLists c;
  // Snapshot of a public ML task taxonomy; pinned for reproducibility.
  c.ml_tasks = {
      "text-classification",       "token-classification",
      "question-answering",        "summarization",
      "translation",               "text-generation",
      "fill-mask",                 "sentence-similarity",
      "feature-extraction",        "text-to-image",
      "image-to-text",             "image-classification",
      "object-detection",          "image-segmentation",
      "semantic-segmentation",     "depth-estimation",
      "video-classification",      "zero-shot-classification",
      "zero-shot-image-classification", "image-to-image",
      "unconditional-image-generation", "text-to-speech",
      "automatic-speech-recognition", "audio-classification",
      "audio-to-audio",            "voice-activity-detection",
      "tabular-classification",    "tabular-regression",
      "time-series-forecasting",   "reinforcement-learning",
      "robotics",                  "graph-machine-learning",
      "visual-question-answering", "document-question-answering",
      "table-question-answering",  "conversational",
      "multiple-choice",           "text-retrieval",
      "named-entity-recognition",  "sentiment-analysis"};
  c.funder_types = {"public", "private", "mixed"};
  c.gathering_team_types = {"public", "private", "crowdsourcing"};
  c.annotation_team_types = {"internal", "external", "crowd-workers"};
  c.gathering_process_types = {"web scraping or apis",
                               "physical sensors or devices",
                               "surveys or interviews",
                               "manual expert collection",
                               "compiled from existing sources",
                               "synthetic generation",
                               "other"};
  c.annotation_process_types = {"manual expert annotation",
                                "crowd annotation",
                                "automatic annotation",
                                "semi-automatic annotation",
                                "derived from existing labels",
                                "other"};
  return c;
}

namespace {
void check_list(const std::string& name, const std::vector<std::string>& list) {
  if (list.empty()) throw std::invalid_argument("category list '" + name + "' is empty");
  std::set<std::string> unique;
  for (const auto& item : list) {
    if (item != util::to_lower(item)) {
      throw std::invalid_argument("category '" + item + "' in '" + name +
                                  "' is not lowercase");
    }
    if (!unique.insert(item).second) {
      throw std::invalid_argument("duplicate category '" + item + "' in '" + name + "'");
    }
  }
}
}  // namespace

void CategoryLists::validate() const {
  check_list("ml_tasks", ml_tasks);
  check_list("funder_types", funder_types);
  check_list("gathering_team_types", gathering_team_types);
  check_list("annotation_team_types", annotation_team_types);
  check_list("gathering_process_types", gathering_process_types);
  check_list("annotation_process_types", annotation_process_types);
}

CategoryLists CategoryLists::from_json(const json& j) {
  CategoryLists c = defaults();
  auto load = [&](const char* key, std::vector<std::string>& target) {
    if (j.contains(key)) target = j.at(key).get<std::vector<std::string>>();
  };
  load("ml_tasks", c.ml_tasks);
  load("funder_types", c.funder_types);
  load("gathering_team_types", c.gathering_team_types);
  load("annotation_team_types", c.annotation_team_types);
  load("gathering_process_types", c.gathering_process_types);
  load("annotation_process_types", c.annotation_process_types);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// schemas

const std::vector<std::string>& schema_fields(const std::string& dimension) {
  static const std::map<std::string, std::vector<std::string>> schemas = {
      {"uses",
       {"purposes", "gaps", "ml_tasks", "recommended_uses", "non_recommended_uses",
        "benchmarks"}},
      {"contributors",
       {"authors", "funders", "funder_types", "grant_ids", "maintainers",
        "maintenance_policies"}},
      {"distribution",
       {"access_links", "license", "third_party_licensor", "attribution_notice",
        "data_rights", "model_rights", "deprecation_policy"}},
      {"composition",
       {"file_structure", "file_formats", "file_descriptions", "attribute_descriptions",
        "data_splits", "consistency_rules", "statistics"}},
      {"gathering",
       {"description", "process_type", "team_description", "team_type",
        "team_demographics", "sources", "source_issues", "infrastructure", "geolocation",
        "timeframe", "crowd_labor_conditions"}},
      {"annotation",
       {"description", "process_type", "team_description", "team_type",
        "team_demographics", "infrastructure_tools", "tool_details", "labels",
        "validation_methods", "guidelines", "crowd_labor_conditions"}},
      {"social_concerns", {"biases", "sensitivity_issues", "privacy_issues"}},
  };
  auto it = schemas.find(dimension);
  if (it == schemas.end()) throw std::invalid_argument("unknown dimension '" + dimension + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// chain compositions

namespace {

InContextStep qa(std::string id, std::string query, int k = 4) {
  InContextStep s;
  s.id = std::move(id);
  s.query_template = std::move(query);
  s.k = k;
  return s;
}

InContextStep qa_each(std::string id, std::string query, std::string input_ref) {
  InContextStep s = qa(std::move(id), std::move(query));
  s.input_ref = std::move(input_ref);
  return s;
}

RefineStep refine(std::string id, std::string input_ref) {
  RefineStep s;
  s.id = std::move(id);
  s.input_ref = std::move(input_ref);
  return s;
}

ClassifyStep classify(std::string id, std::string input_ref,
                      std::vector<std::string> categories) {
  ClassifyStep s;
  s.id = std::move(id);
  s.input_ref = std::move(input_ref);
  s.categories = std::move(categories);
  return s;
}

ParseStep parse(std::string id, std::string input_ref, std::string entity) {
  ParseStep s;
  s.id = std::move(id);
  s.input_ref = std::move(input_ref);
  s.entity_name = std::move(entity);
  return s;
}

SummarizeStep summarize(std::string id, std::string input_ref) {
  SummarizeStep s;
  s.id = std::move(id);
  s.input_ref = std::move(input_ref);
  return s;
}

ChainSpec uses_chain(const CategoryLists& cats) {
  ChainSpec c;
  c.dimension = "uses";
  c.steps = {
      qa("purposes_qa", "For which purposes was the dataset created?"),
      parse("purposes", "purposes_qa", "purpose"),
      qa("gaps_qa", "Which gaps does the dataset intend to fill?"),
      parse("gaps", "gaps_qa", "gap"),
      qa("tasks_qa", "Which machine learning tasks is the dataset designed for?"),
      classify("ml_tasks", "tasks_qa", cats.ml_tasks),
      qa("recommended_uses", "What are the recommended uses of the dataset?"),
      qa("non_recommended_uses",
         "Are there uses of the dataset that the authors advise against?"),
      qa("approaches_qa",
         "Which machine learning approaches or models have been tested on the dataset?"),
      parse("approaches", "approaches_qa", "ML approach"),
      qa_each("benchmarks",
              "What metrics (accuracy, F1, precision, recall) are reported for {entity} "
              "on the dataset?",
              "approaches"),
  };
  c.output_map = {{"purposes", "purposes"},
                  {"gaps", "gaps"},
                  {"ml_tasks", "ml_tasks"},
                  {"recommended_uses", "recommended_uses"},
                  {"non_recommended_uses", "non_recommended_uses"},
                  {"benchmarks", "benchmarks"}};
  return c;
}

ChainSpec contributors_chain(const CategoryLists& cats) {
  ChainSpec c;
  c.dimension = "contributors";
  c.steps = {
      qa("authors_qa", "Who are the authors or creators of the dataset?"),
      parse("authors", "authors_qa", "author"),
      qa("funding_qa", "Who funded the creation of the dataset?"),
      parse("funders", "funding_qa", "funder"),
      OpenDomainStep{"funder_types",
                     "Is '{entity}' a public, private, or mixed funder? Answer with one "
                     "word.",
                     "funders"},
      qa("grants_qa", "Which grant numbers or grant identifiers are mentioned for the "
                      "funding of the dataset?"),
      parse("grant_ids", "grants_qa", "grant identifier"),
      qa("maintainers_qa", "Who maintains the dataset?"),
      parse("maintainers", "maintainers_qa", "maintainer"),
      qa("maintenance_policies",
         "What are the maintenance policies of the dataset (errata, updates, "
         "deprecation)?"),
  };
  (void)cats;
  c.output_map = {{"authors", "authors"},
                  {"funders", "funders"},
                  {"funder_types", "funder_types"},
                  {"grant_ids", "grant_ids"},
                  {"maintainers", "maintainers"},
                  {"maintenance_policies", "maintenance_policies"}};
  return c;
}

ChainSpec distribution_chain() {
  ChainSpec c;
  c.dimension = "distribution";
  c.steps = {
      qa("access_links", "Where can the dataset be accessed or downloaded?"),
      qa("license", "Under which license is the dataset released?"),
      qa("third_party_licensor",
         "Is there any third party in charge of the license of the dataset?"),
      qa("attribution_notice",
         "Which attribution notice is required when using the dataset?"),
      qa("data_rights", "Which rights over the standalone data are stated?"),
      qa("model_rights",
         "Which rights are stated over models trained with the dataset?"),
      qa("deprecation_policy", "Does any deprecation policy of the dataset exist?"),
  };
  for (const auto& field : schema_fields("distribution")) c.output_map[field] = field;
  return c;
}

ChainSpec composition_chain() {
  ChainSpec c;
  c.dimension = "composition";
  c.steps = {
      qa("file_structure", "Which file structures is the dataset composed of?"),
      qa("file_formats", "Which file formats does the dataset use?"),
      qa("file_descriptions", "What does each file of the dataset contain?"),
      qa("attribute_descriptions",
         "What are the attributes or fields of the dataset records?"),
      qa("data_splits",
         "Is there a recommended data split for training, validation, and testing?"),
      qa("consistency_rules", "Are there any consistency rules over the dataset?"),
      qa("statistics", "Which relevant statistics of the dataset are reported?"),
  };
  for (const auto& field : schema_fields("composition")) c.output_map[field] = field;
  return c;
}

ChainSpec gathering_chain(const CategoryLists& cats) {
  ChainSpec c;
  c.dimension = "gathering";
  BranchStep branch;
  branch.id = "crowd_branch";
  branch.input_ref = "team_type";
  branch.match_category = "crowdsourcing";
  branch.subchain = {
      qa("crowd_labor_conditions",
         "Which company provided the crowdsourcing service and what were the labor "
         "conditions of the workers?"),
  };
  c.steps = {
      qa("desc_qa", "How was the data {gathering} process of the dataset performed?"),
      refine("desc_refine", "desc_qa"),
      classify("process_type", "desc_refine", cats.gathering_process_types),
      summarize("description", "desc_refine"),
      qa("team_qa", "Who was the team that performed the data {gathering} process?"),
      refine("team_refine", "team_qa"),
      classify("team_type", "team_refine", cats.gathering_team_types),
      qa("team_demographics",
         "Is there demographic information about the data {gathering} team?"),
      qa("sources", "What are the sources of the data?"),
      qa("source_issues", "Are there any potential issues of the data sources?"),
      qa("infrastructure", "Which infrastructure was used to collect the data?"),
      qa("geolocation", "Where was the data {gathering} process performed?"),
      qa("timeframe", "Over which timeframe was the data {gathering} process performed?"),
      branch,
  };
  c.output_map = {{"description", "description"},
                  {"process_type", "process_type"},
                  {"team_description", "team_refine"},
                  {"team_type", "team_type"},
                  {"team_demographics", "team_demographics"},
                  {"sources", "sources"},
                  {"source_issues", "source_issues"},
                  {"infrastructure", "infrastructure"},
                  {"geolocation", "geolocation"},
                  {"timeframe", "timeframe"},
                  {"crowd_labor_conditions", "crowd_labor_conditions"}};
  return c;
}

ChainSpec annotation_chain(const CategoryLists& cats) {
  ChainSpec c;
  c.dimension = "annotation";
  BranchStep branch;
  branch.id = "crowd_branch";
  branch.input_ref = "team_type";
  branch.match_category = "crowd-workers";
  branch.subchain = {
      qa("crowd_labor_conditions",
         "Which company provided the crowd-workers service and what were the labor "
         "conditions of the workers?"),
  };
  c.steps = {
      qa("desc_qa", "How was the {annotation} process of the dataset performed?"),
      refine("desc_refine", "desc_qa"),
      classify("process_type", "desc_refine", cats.annotation_process_types),
      summarize("description", "desc_refine"),
      qa("team_qa", "Who was the team that performed the {annotation} of the data?"),
      refine("team_refine", "team_qa"),
      classify("team_type", "team_refine", cats.annotation_team_types),
      qa("team_demographics",
         "Is there demographic information about the {annotation} team?"),
      qa("tools_qa", "Which tools or platforms were used to annotate the data?"),
      parse("infrastructure_tools", "tools_qa", "tool"),
      qa_each("tool_details", "What details are given about the use of {entity} for the "
                              "{annotation} of the data?",
              "infrastructure_tools"),
      qa("labels", "Which labels are generated by the {annotation} process?"),
      qa("validation_methods",
         "Which validation methods were applied to the labels of the dataset?"),
      qa("guidelines",
         "Were {annotation} guidelines shared with the {annotation} team?"),
      branch,
  };
  c.output_map = {{"description", "description"},
                  {"process_type", "process_type"},
                  {"team_description", "team_refine"},
                  {"team_type", "team_type"},
                  {"team_demographics", "team_demographics"},
                  {"infrastructure_tools", "infrastructure_tools"},
                  {"tool_details", "tool_details"},
                  {"labels", "labels"},
                  {"validation_methods", "validation_methods"},
                  {"guidelines", "guidelines"},
                  {"crowd_labor_conditions", "crowd_labor_conditions"}};
  return c;
}

ChainSpec social_concerns_chain() {
  ChainSpec c;
  c.dimension = "social_concerns";
  c.steps = {
      qa("biases",
         "Are there mentions of biases in the data, such as geographical biases or "
         "representativeness issues?"),
      qa("sensitivity_issues",
         "Could the content of the data be offensive or sensitive to any group of "
         "people?"),
      qa("privacy_issues",
         "Could the data expose private information, and how was it anonymized?"),
  };
  c.output_map = {{"biases", "biases"},
                  {"sensitivity_issues", "sensitivity_issues"},
                  {"privacy_issues", "privacy_issues"}};
  return c;
}

}  // namespace

ChainSpec chain_for(const std::string& dimension, const CategoryLists& cats) {
  ChainSpec c;
  if (dimension == "uses") c = uses_chain(cats);
  else if (dimension == "contributors") c = contributors_chain(cats);
  else if (dimension == "distribution") c = distribution_chain();
  else if (dimension == "composition") c = composition_chain();
  else if (dimension == "gathering") c = gathering_chain(cats);
  else if (dimension == "annotation") c = annotation_chain(cats);
  else if (dimension == "social_concerns") c = social_concerns_chain();
  else throw std::invalid_argument("unknown dimension '" + dimension + "'");
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// extraction

namespace {

ExtractedField field_from(const std::string& name, const chain::StepOutput* out) {
  ExtractedField f;
  f.name = name;
  if (out == nullptr) {  // branch not taken, or chain aborted before this step
    f.found = false;
    return f;
  }
  f.evidence = out->evidence;
  f.open_domain = out->open_domain;
  switch (out->kind) {
    case chain::OutputKind::Found:
      f.kind = ExtractedField::Kind::Text;
      f.text = out->text;
      f.found = true;
      break;
    case chain::OutputKind::NotFound:
      f.kind = ExtractedField::Kind::Text;
      f.found = false;
      break;
    case chain::OutputKind::Category:
      f.kind = ExtractedField::Kind::Category;
      if (out->short_circuit) {
        f.found = false;
      } else {
        f.text = out->category;
        f.found = true;
      }
      break;
    case chain::OutputKind::Entities:
      f.kind = ExtractedField::Kind::Entities;
      f.entities = out->entities;
      f.found = !out->short_circuit && !out->entities.empty();
      break;
  }
  return f;
}

}  // namespace

DimensionRecord extract_dimension(chain::ChainEngine& engine, const std::string& dimension,
                                  const CategoryLists& cats,
                                  const std::string& document_id,
                                  const ExtractionMeta& meta) {
  const ChainSpec spec = chain_for(dimension, cats);
  const chain::ChainResult result = engine.run_chain(spec);

  DimensionRecord record;
  record.dimension = dimension;
  record.document_id = document_id;
  record.meta = meta;
  if (result.error) {
    record.error = result.error->step_id + ": " + result.error->message;
  }
  for (const auto& field : schema_fields(dimension)) {
    const auto it = spec.output_map.find(field);
    const chain::StepOutput* out =
        it == spec.output_map.end() ? nullptr : result.find(it->second);
    record.fields.push_back(field_from(field, out));
  }
  return record;
}

std::vector<DimensionRecord> extract_all(chain::ChainEngine& engine,
                                         const CategoryLists& cats,
                                         const std::string& document_id,
                                         const ExtractionMeta& meta) {
  std::vector<DimensionRecord> records;
  records.reserve(kDimensions.size());
  for (const char* dimension : kDimensions) {
    records.push_back(extract_dimension(engine, dimension, cats, document_id, meta));
  }
  return records;
}

// ---------------------------------------------------------------------------
// serialization

json DimensionRecord::to_json() const {
  json fields_json = json::array();
  for (const auto& f : fields) {
    json fj = {{"name", f.name}, {"found", f.found}};
    switch (f.kind) {
      case ExtractedField::Kind::Text: fj["kind"] = "text"; break;
      case ExtractedField::Kind::Category: fj["kind"] = "category"; break;
      case ExtractedField::Kind::Entities: fj["kind"] = "entities"; break;
    }
    if (f.kind == ExtractedField::Kind::Entities) {
      fj["value"] = f.entities;
    } else {
      fj["value"] = f.found ? f.text : "";
    }
    fj["evidence"] = f.evidence;
    fj["open_domain"] = f.open_domain;
    fields_json.push_back(std::move(fj));
  }
  json j = {{"dimension", dimension},
            {"document_id", document_id},
            {"fields", std::move(fields_json)},
            {"metadata",
             {{"model", meta.model},
              {"prompt_catalog_digest", meta.catalog_digest},
              {"timestamp", meta.timestamp}}}};
  if (error) j["error"] = *error;
  return j;
}

const ExtractedField* DimensionRecord::find(const std::string& name) const {
  for (const auto& f : fields) {
    if (f.name == name) return &f;
  }
  return nullptr;
}

}  // namespace datadoc::dims
