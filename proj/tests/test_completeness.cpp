#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <memory>

#include "datadoc/completeness.hpp"
#include "datadoc/gateway.hpp"
#include "datadoc/retrieval.hpp"

using namespace datadoc;
using completeness::Mode;
using dims::ExtractedField;
using gateway::MockRule;

namespace {

ExtractedField text_field(std::string name, std::string value, bool found = true) {
  ExtractedField f;
  f.name = std::move(name);
  f.kind = ExtractedField::Kind::Text;
  f.text = std::move(value);
  f.found = found;
  return f;
}

ExtractedField category_field(std::string name, std::string value) {
  ExtractedField f;
  f.name = std::move(name);
  f.kind = ExtractedField::Kind::Category;
  f.text = std::move(value);
  f.found = true;
  return f;
}

ExtractedField entity_field(std::string name, std::vector<std::string> entities) {
  ExtractedField f;
  f.name = std::move(name);
  f.kind = ExtractedField::Kind::Entities;
  f.entities = std::move(entities);
  f.found = !f.entities.empty();
  return f;
}

dims::DimensionRecord record_of(std::string dimension, std::vector<ExtractedField> fields) {
  dims::DimensionRecord r;
  r.dimension = std::move(dimension);
  r.fields = std::move(fields);
  return r;
}

gateway::Gateway make_gateway(std::vector<MockRule> rules) {
  gateway::RetryPolicy policy;
  policy.backoff_base_ms = 0.0;
  return gateway::Gateway(std::make_shared<gateway::MockBackend>(std::move(rules)),
                          std::make_shared<retrieval::TestEmbedder>(8), policy);
}

}  // namespace

TEST_CASE("sentinel coverage follows found, emptiness, and the unknown category") {
  const auto report = completeness::assess({record_of(
      "uses", {
                  text_field("a", "some answer"),          // covered
                  text_field("b", "", false),              // not found
                  text_field("c", "   "),                  // found but blank
                  category_field("d", "text-classification"),  // covered
                  category_field("e", "unknown"),          // classification gave up
                  entity_field("f", {"x", "y"}),           // covered
                  entity_field("g", {}),                   // empty entity list
              })});
  REQUIRE(report.fields.size() == 7);
  const std::vector<bool> want = {true, false, false, true, false, true, false};
  for (size_t i = 0; i < want.size(); ++i) {
    CHECK(report.fields[i].covered == want[i]);
    CHECK_FALSE(report.fields[i].fallback);
  }
  CHECK(report.per_dimension.at("uses") == doctest::Approx(3.0 / 7.0));
  CHECK(report.overall == doctest::Approx(3.0 / 7.0));
  CHECK(report.partial);  // only one of the seven dimensions present
}

TEST_CASE("per-dimension ratios and the overall ratio are consistent") {
  const auto report = completeness::assess({
      record_of("uses", {text_field("a", "x"), text_field("b", "", false)}),
      record_of("gathering", {text_field("c", "y")}),
  });
  CHECK(report.per_dimension.at("uses") == doctest::Approx(0.5));
  CHECK(report.per_dimension.at("gathering") == doctest::Approx(1.0));
  CHECK(report.overall == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("a full seven-dimension report is not partial") {
  std::vector<dims::DimensionRecord> records;
  for (const char* d : dims::kDimensions) {
    records.push_back(record_of(d, {text_field("a", "x")}));
  }
  const auto report = completeness::assess(records);
  CHECK_FALSE(report.partial);
  CHECK(report.overall == doctest::Approx(1.0));
}

TEST_CASE("assessing nothing is an error") {
  CHECK_THROWS_AS(completeness::assess({}), std::invalid_argument);
  CHECK_THROWS_AS(completeness::assess({record_of("uses", {})}, Mode::Entailment, nullptr),
                  std::invalid_argument);
}

TEST_CASE("hypothesis pairs: specific entries win, others get a generic pair") {
  const auto catalog = completeness::HypothesisCatalog::defaults();
  const auto specific = catalog.pair_for("gathering", "team_demographics");
  CHECK(specific.positive == "there is demographic information of the gathering");
  const auto generic = catalog.pair_for("distribution", "deprecation_policy");
  CHECK(generic.positive == "there is information about the deprecation policy");
  CHECK(generic.negative == "there is no information about the deprecation policy");

  CHECK_THROWS_AS(
      completeness::HypothesisCatalog::from_json({{"k", nlohmann::json::array({"only one"})}}),
      std::runtime_error);
}

TEST_CASE("entailment mode trusts the A/B verdict over the sentinel rule") {
  auto gw = make_gateway({
      // the judge disagrees with the sentinel rule in both directions
      {MockRule::Match::Substring, "'uses.a'", "B"},
      {MockRule::Match::Substring, "'uses.b'", " A."},  // parses after normalization
  });
  const auto report = completeness::assess(
      {record_of("uses", {text_field("a", "rich answer"), text_field("b", "", false)})},
      Mode::Entailment, &gw);
  REQUIRE(report.fields.size() == 2);
  CHECK_FALSE(report.fields[0].covered);
  CHECK_FALSE(report.fields[0].fallback);
  CHECK(report.fields[1].covered);
  CHECK(gw.completion_call_count() == 2);
}

TEST_CASE("unparseable entailment replies fall back to the sentinel rule") {
  auto gw = make_gateway({{MockRule::Match::Substring, "", "C maybe?"}});
  const auto report = completeness::assess(
      {record_of("uses", {text_field("a", "rich answer"), text_field("b", "", false)})},
      Mode::Entailment, &gw);
  CHECK(report.fields[0].covered);  // sentinel says covered
  CHECK(report.fields[0].fallback);
  CHECK_FALSE(report.fields[1].covered);
  CHECK(report.fields[1].fallback);
}

TEST_CASE("backend failures during entailment fall back to the sentinel rule") {
  auto gw = make_gateway({});  // every prompt is unmatched
  const auto report = completeness::assess(
      {record_of("uses", {text_field("a", "rich answer")})}, Mode::Entailment, &gw);
  CHECK(report.fields[0].covered);
  CHECK(report.fields[0].fallback);
}

TEST_CASE("report serialization carries fields, ratios, and the partial flag") {
  const auto report = completeness::assess(
      {record_of("uses", {text_field("a", "x"), text_field("b", "", false)})});
  const auto j = report.to_json();
  CHECK(j.at("fields").size() == 2);
  CHECK(j.at("fields")[0].at("dimension") == "uses");
  CHECK(j.at("fields")[0].at("covered") == true);
  CHECK(j.at("per_dimension").at("uses") == doctest::Approx(0.5));
  CHECK(j.at("overall") == doctest::Approx(0.5));
  CHECK(j.at("partial") == true);
}
