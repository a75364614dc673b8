#include "datadoc/completeness.hpp"

#include <stdexcept>

#include "datadoc/chain.hpp"
#include "datadoc/util.hpp"

namespace datadoc::completeness {

using nlohmann::json;

HypothesisCatalog HypothesisCatalog::defaults() {
  HypothesisCatalog c;
  c.pairs_["gathering.team_demographics"] = {
      "there is demographic information of the gathering",
      "there is no demographic information of the gathering"};
  c.pairs_["annotation.team_demographics"] = {
      "there is demographic information of the annotation",
      "there is no demographic information of the annotation"};
  return c;
}

HypothesisCatalog HypothesisCatalog::from_json(const json& j) {
  HypothesisCatalog c = defaults();
  for (const auto& [key, value] : j.items()) {
    if (!value.is_array() || value.size() != 2) {
      throw std::runtime_error("hypothesis entry '" + key +
                               "' must be a [positive, negative] pair");
    }
    c.pairs_[key] = {value[0].get<std::string>(), value[1].get<std::string>()};
  }
  return c;
}

HypothesisPair HypothesisCatalog::pair_for(const std::string& dimension,
                                           const std::string& field) const {
  auto it = pairs_.find(dimension + "." + field);
  if (it != pairs_.end()) return it->second;
  std::string readable = field;
  for (char& ch : readable) {
    if (ch == '_') ch = ' ';
  }
  return {"there is information about the " + readable,
          "there is no information about the " + readable};
}

namespace {

bool sentinel_covered(const dims::ExtractedField& f) {
  if (!f.found) return false;
  switch (f.kind) {
    case dims::ExtractedField::Kind::Text:
      return !util::trim(f.text).empty();
    case dims::ExtractedField::Kind::Category:
      return !f.text.empty() && f.text != "unknown";
    case dims::ExtractedField::Kind::Entities:
      return !f.entities.empty();
  }
  return false;
}

// Argmax over the two hypotheses, mirrored as an A/B choice.
bool entailment_covered(const dims::DimensionRecord& record,
                        const dims::ExtractedField& f, const HypothesisPair& pair,
                        gateway::Gateway& gw, bool& fallback) {
  std::string value = f.kind == dims::ExtractedField::Kind::Entities
                          ? json(f.entities).dump()
                          : f.text;
  if (value.empty()) value = "(no answer)";
  gateway::CompletionRequest req;
  req.prompt = "Given the following extracted answer for '" + record.dimension + "." +
               f.name + "':\n\n" + value +
               "\n\nWhich statement is true?\nA: " + pair.positive +
               "\nB: " + pair.negative + "\nReply with exactly A or B.";
  req.tag = "completeness/" + record.dimension + "." + f.name;
  try {
    const std::string reply = chain::normalize_category(gw.complete(req).text);
    if (reply == "a") return true;
    if (reply == "b") return false;
    fallback = true;  // unparseable reply, fall back to the sentinel rule
    return sentinel_covered(f);
  } catch (const gateway::BackendError&) {
    fallback = true;
    return sentinel_covered(f);
  }
}

}  // namespace

CompletenessReport assess(const std::vector<dims::DimensionRecord>& records, Mode mode,
                          gateway::Gateway* gw, const HypothesisCatalog* hypotheses) {
  if (records.empty()) throw std::invalid_argument("no records to assess");
  if (mode == Mode::Entailment && gw == nullptr) {
    throw std::invalid_argument("entailment mode needs a gateway");
  }
  const HypothesisCatalog default_catalog = HypothesisCatalog::defaults();
  const HypothesisCatalog& catalog = hypotheses ? *hypotheses : default_catalog;

  CompletenessReport report;
  std::map<std::string, std::pair<int, int>> per_dim;  // dimension -> (covered, total)
  int covered_total = 0;
  int field_total = 0;
  for (const auto& record : records) {
    for (const auto& f : record.fields) {
      FieldCoverage fc;
      fc.dimension = record.dimension;
      fc.field = f.name;
      if (mode == Mode::Sentinel) {
        fc.covered = sentinel_covered(f);
      } else {
        fc.covered = entailment_covered(record, f, catalog.pair_for(record.dimension, f.name),
                                        *gw, fc.fallback);
      }
      auto& [covered, total] = per_dim[record.dimension];
      if (fc.covered) ++covered;
      ++total;
      if (fc.covered) ++covered_total;
      ++field_total;
      report.fields.push_back(std::move(fc));
    }
  }
  for (const auto& [dimension, counts] : per_dim) {
    report.per_dimension[dimension] =
        counts.second == 0 ? 0.0 : static_cast<double>(counts.first) / counts.second;
  }
  report.overall = field_total == 0 ? 0.0 : static_cast<double>(covered_total) / field_total;
  report.partial = records.size() < dims::kDimensions.size();
  return report;
}

json CompletenessReport::to_json() const {
  json fields_json = json::array();
  for (const auto& f : fields) {
    fields_json.push_back({{"dimension", f.dimension},
                           {"field", f.field},
                           {"covered", f.covered},
                           {"fallback", f.fallback}});
  }
  return {{"fields", std::move(fields_json)},
          {"per_dimension", per_dimension},
          {"overall", overall},
          {"partial", partial}};
}

}  // namespace datadoc::completeness
