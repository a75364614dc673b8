#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "datadoc/config.hpp"
#include "datadoc/jsonschema.hpp"
#include "datadoc/pipeline.hpp"

using namespace datadoc;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kFixtures = DATADOC_FIXTURE_DIR;
const fs::path kGolden = DATADOC_GOLDEN_DIR;
const fs::path kData = DATADOC_DATA_DIR;

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) {
    path = fs::temp_directory_path() / (name + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

config::AppConfig mock_config() {
  return config::AppConfig::from_file(kFixtures / "config_mock.json");
}

}  // namespace

TEST_CASE("cache keys react to every preprocessing ingredient") {
  const auto dict = ingest::TermDictionary::defaults();
  ingest::SplitConfig split;
  const std::string base = pipeline::cache_key("text", split, dict, "digest", "test-ngram-64");
  CHECK(base.size() == 64);
  CHECK(pipeline::cache_key("other", split, dict, "digest", "test-ngram-64") != base);
  ingest::SplitConfig other_split;
  other_split.target_len = 500;
  CHECK(pipeline::cache_key("text", other_split, dict, "digest", "test-ngram-64") != base);
  ingest::TermDictionary other_dict;
  other_dict.add("gathering", {"gathering"});
  CHECK(pipeline::cache_key("text", split, other_dict, "digest", "test-ngram-64") != base);
  CHECK(pipeline::cache_key("text", split, dict, "other", "test-ngram-64") != base);
  CHECK(pipeline::cache_key("text", split, dict, "digest", "test-ngram-32") != base);
  // line endings are normalized away
  CHECK(pipeline::cache_key("a\r\nb", split, dict, "digest", "test-ngram-64") ==
        pipeline::cache_key("a\nb", split, dict, "digest", "test-ngram-64"));
}

TEST_CASE("prepared documents survive a JSON round trip") {
  auto cfg = mock_config();
  auto rt = config::build_runtime(cfg);
  pipeline::Pipeline pipe(rt);
  const auto prepared = pipe.prepare(pipeline::load_raw_input(
      kFixtures / "sample_doc.txt", kFixtures / "sample_doc.tables.json"));

  const auto restored = pipeline::from_json(pipeline::to_json(prepared.doc, prepared.index));
  CHECK(restored.doc.id == prepared.doc.id);
  REQUIRE(restored.doc.passages.size() == prepared.doc.passages.size());
  for (size_t i = 0; i < prepared.doc.passages.size(); ++i) {
    CHECK(restored.doc.passages[i].text == prepared.doc.passages[i].text);
    CHECK(restored.doc.passages[i].origin == prepared.doc.passages[i].origin);
  }
  CHECK(restored.doc.term_profile.chosen == prepared.doc.term_profile.chosen);
  CHECK(restored.doc.term_profile.counts == prepared.doc.term_profile.counts);
  CHECK(restored.index.dim == prepared.index.dim);
  CHECK(restored.index.entries == prepared.index.entries);
}

TEST_CASE("the document cache stores, returns, and ages out entries") {
  TempDir dir("datadoc-cache-test");
  ingest::Document doc;
  doc.id = "abc";
  ingest::Passage p;
  p.text = "text";
  doc.passages.push_back(p);
  retrieval::VectorIndex index;
  index.dim = 2;
  index.entries = {{0, {1.0f, 0.0f}}};

  {
    pipeline::DocumentCache cache(dir.path);
    CHECK(cache.size() == 0);
    CHECK_FALSE(cache.get("k1"));
    cache.put("k1", doc, index);
    CHECK(cache.size() == 1);
    const auto hit = cache.get("k1");
    REQUIRE(hit);
    CHECK(hit->doc.id == "abc");
    CHECK(hit->cache_hit);
  }

  // age the entry past the eviction horizon and reopen
  for (const auto& entry : fs::directory_iterator(dir.path)) {
    fs::last_write_time(entry.path(),
                        fs::file_time_type::clock::now() - std::chrono::hours(24 * 40));
  }
  pipeline::DocumentCache reopened(dir.path);
  CHECK(reopened.size() == 0);
  CHECK_FALSE(reopened.get("k1"));
}

TEST_CASE("re-preparing a cached document does not touch the embedder") {
  TempDir dir("datadoc-pipe-cache");
  auto cfg = mock_config();
  cfg.cache_dir = dir.path;
  auto rt = config::build_runtime(cfg);
  pipeline::Pipeline pipe(rt);
  const auto input = pipeline::load_raw_input(kFixtures / "sample_doc.txt",
                                              kFixtures / "sample_doc.tables.json");

  const auto first = pipe.prepare(input);
  CHECK_FALSE(first.cache_hit);
  const size_t embeds_after_first = rt.gw->embed_call_count();
  // at least one embedding per passage (table contextualization retrieves too)
  CHECK(embeds_after_first >= first.doc.passages.size());

  const auto second = pipe.prepare(input);
  CHECK(second.cache_hit);
  CHECK(rt.gw->embed_call_count() == embeds_after_first);  // zero new embeddings
  CHECK(second.doc.id == first.doc.id);
  CHECK(second.index.entries == first.index.entries);

  // a different prompt catalog changes the key, forcing a rebuild
  const fs::path catalog_path = dir.path / "catalog.json";
  std::ofstream(catalog_path) << R"({"uses.purposes_qa": "custom {query} {context} {sentinel}"})";
  cfg.prompt_catalog_path = catalog_path;
  auto rt2 = config::build_runtime(cfg);
  pipeline::Pipeline pipe2(rt2);
  const auto third = pipe2.prepare(input);
  CHECK_FALSE(third.cache_hit);
  CHECK(rt2.gw->embed_call_count() > 0);
  pipeline::DocumentCache cache(dir.path.string());
  CHECK(cache.size() >= 2);
}

TEST_CASE("analyze output matches the committed golden file byte for byte") {
  TempDir dir("datadoc-golden");
  const fs::path out = dir.path / "analysis.json";
  const int rc = pipeline::run_analyze(mock_config(), kFixtures / "sample_doc.txt",
                                       kFixtures / "sample_doc.tables.json", "all", out);
  CHECK(rc == 0);
  CHECK(slurp(out) == slurp(kGolden / "analysis_mock.json"));

  // and the run is deterministic end to end
  const fs::path again = dir.path / "again.json";
  pipeline::run_analyze(mock_config(), kFixtures / "sample_doc.txt",
                        kFixtures / "sample_doc.tables.json", "all", again);
  CHECK(slurp(again) == slurp(out));
}

TEST_CASE("analyze output validates against the published schema") {
  TempDir dir("datadoc-schema");
  const fs::path out = dir.path / "analysis.json";
  REQUIRE(pipeline::run_analyze(mock_config(), kFixtures / "sample_doc.txt",
                                kFixtures / "sample_doc.tables.json", "all", out) == 0);
  const json schema = jsonschema::load_schema(kData / "schemas" / "cli_output.schema.json");
  const auto errors = jsonschema::validate(schema, json::parse(slurp(out)));
  for (const auto& e : errors) MESSAGE(e);
  CHECK(errors.empty());
}

TEST_CASE("single-dimension analyze produces one record") {
  TempDir dir("datadoc-single");
  const fs::path out = dir.path / "analysis.json";
  REQUIRE(pipeline::run_analyze(mock_config(), kFixtures / "sample_doc.txt",
                                kFixtures / "sample_doc.tables.json", "uses", out) == 0);
  const json output = json::parse(slurp(out));
  REQUIRE(output.at("records").size() == 1);
  CHECK(output.at("records")[0].at("dimension") == "uses");
  CHECK(output.at("completeness").at("partial") == true);
}

TEST_CASE("analyze exit codes distinguish fatal and partial failures") {
  TempDir dir("datadoc-exit");
  const fs::path out = dir.path / "analysis.json";

  CHECK(pipeline::run_analyze(mock_config(), dir.path / "missing.txt", {}, "all", out) == 1);
  CHECK(pipeline::run_analyze(mock_config(), kFixtures / "sample_doc.txt", {}, "provenance",
                              out) == 1);

  auto fault_cfg = mock_config();
  fault_cfg.mock_rules_path = kFixtures / "fault_rules.json";
  const int rc = pipeline::run_analyze(fault_cfg, kFixtures / "sample_doc.txt",
                                       kFixtures / "sample_doc.tables.json", "all", out);
  CHECK(rc == 2);
  const json output = json::parse(slurp(out));
  int failed = 0;
  for (const auto& record : output.at("records")) {
    if (record.contains("error")) {
      ++failed;
      CHECK(record.at("dimension") == "distribution");
    }
  }
  CHECK(failed == 1);
}
