#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "datadoc/dimensions.hpp"
#include "datadoc/gateway.hpp"
#include "json.hpp"

namespace datadoc::completeness {

enum class Mode { Sentinel, Entailment };

struct HypothesisPair {
  std::string positive;
  std::string negative;
};

/// Per-field hypothesis statements, keyed "<dimension>.<field>"; fields
/// without an entry get a generic pair built from the field name.
class HypothesisCatalog {
 public:
  static HypothesisCatalog defaults();
  static HypothesisCatalog from_json(const nlohmann::json& j);

  HypothesisPair pair_for(const std::string& dimension, const std::string& field) const;

 private:
  std::map<std::string, HypothesisPair> pairs_;
};

struct FieldCoverage {
  std::string dimension;
  std::string field;
  bool covered = false;
  bool fallback = false;  // entailment call failed, sentinel rule applied
};

struct CompletenessReport {
  std::vector<FieldCoverage> fields;
  std::map<std::string, double> per_dimension;  // coverage ratio per dimension
  double overall = 0.0;
  bool partial = false;  // fewer than the 7 dimensions were analyzed

  nlohmann::json to_json() const;
};

/// Sentinel mode is a pure function of the records: covered iff the field
/// was found with a non-empty value. Entailment mode asks the backend to
/// pick between the paired hypothesis statements per field, falling back
/// to the sentinel rule on backend failure.
CompletenessReport assess(const std::vector<dims::DimensionRecord>& records,
                          Mode mode = Mode::Sentinel, gateway::Gateway* gw = nullptr,
                          const HypothesisCatalog* hypotheses = nullptr);

}  // namespace datadoc::completeness
