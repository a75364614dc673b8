#include "datadoc/pipeline.hpp"

#include <unistd.h>

#include <chrono>
#include <fstream>
#include <stdexcept>

#include "datadoc/chain.hpp"
#include "datadoc/util.hpp"

namespace datadoc::pipeline {

using nlohmann::json;

std::string cache_key(const std::string& text, const ingest::SplitConfig& split,
                      const ingest::TermDictionary& dict, const std::string& catalog_digest,
                      const std::string& embedder_id) {
  return util::sha256_hex(util::normalize_text(text) + "\n" +
                          ingest::preprocessing_digest(split, dict) + "\n" +
                          catalog_digest + "\n" + embedder_id);
}

json to_json(const ingest::Document& doc, const retrieval::VectorIndex& index) {
  json passages = json::array();
  for (const auto& p : doc.passages) {
    passages.push_back({{"index", p.index},
                        {"text", p.text},
                        {"start", p.start},
                        {"end", p.end},
                        {"origin", p.synthetic() ? "table" : "body"}});
  }
  json entries = json::array();
  for (const auto& [idx, vec] : index.entries) {
    entries.push_back({{"passage", idx}, {"vector", vec}});
  }
  return {{"id", doc.id},
          {"passages", std::move(passages)},
          {"term_profile",
           {{"chosen", doc.term_profile.chosen}, {"counts", doc.term_profile.counts}}},
          {"index", {{"dim", index.dim}, {"entries", std::move(entries)}}}};
}

PreparedDocument from_json(const json& j) {
  PreparedDocument out;
  out.doc.id = j.at("id").get<std::string>();
  for (const auto& pj : j.at("passages")) {
    ingest::Passage p;
    p.index = pj.at("index").get<int>();
    p.text = pj.at("text").get<std::string>();
    p.start = pj.at("start").get<std::size_t>();
    p.end = pj.at("end").get<std::size_t>();
    p.origin = pj.at("origin") == "table" ? ingest::PassageOrigin::TableDerived
                                          : ingest::PassageOrigin::Body;
    out.doc.passages.push_back(std::move(p));
  }
  const json& tp = j.at("term_profile");
  out.doc.term_profile.chosen =
      tp.at("chosen").get<std::map<std::string, std::string>>();
  out.doc.term_profile.counts =
      tp.at("counts").get<std::map<std::string, std::map<std::string, int>>>();
  const json& idx = j.at("index");
  out.index.dim = idx.at("dim").get<int>();
  for (const auto& ej : idx.at("entries")) {
    out.index.entries.emplace_back(ej.at("passage").get<int>(),
                                   ej.at("vector").get<retrieval::Vec>());
  }
  return out;
}

DocumentCache::DocumentCache(std::filesystem::path dir, int max_age_days)
    : dir_(std::move(dir)) {
  std::filesystem::create_directories(dir_);
  const auto cutoff = std::filesystem::file_time_type::clock::now() -
                      std::chrono::hours(24 * max_age_days);
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.is_regular_file() && entry.last_write_time() < cutoff) {
      std::filesystem::remove(entry.path());
    }
  }
}

std::filesystem::path DocumentCache::entry_path(const std::string& key) const {
  return dir_ / (key + ".json");
}

std::optional<PreparedDocument> DocumentCache::get(const std::string& key) const {
  std::ifstream in(entry_path(key));
  if (!in) return std::nullopt;
  PreparedDocument prepared = from_json(json::parse(in));
  prepared.cache_hit = true;
  return prepared;
}

void DocumentCache::put(const std::string& key, const ingest::Document& doc,
                        const retrieval::VectorIndex& index) {
  const std::filesystem::path final_path = entry_path(key);
  const std::filesystem::path tmp =
      final_path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write cache entry: " + tmp.string());
    out << to_json(doc, index).dump();
  }
  std::filesystem::rename(tmp, final_path);
}

size_t DocumentCache::size() const {
  size_t n = 0;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.is_regular_file()) ++n;
  }
  return n;
}

Pipeline::Pipeline(config::Runtime& rt) : rt_(rt) {
  if (!rt_.cfg.cache_dir.empty()) cache_.emplace(rt_.cfg.cache_dir);
}

PreparedDocument Pipeline::prepare(const ingest::RawInput& input) {
  const std::string key = cache_key(input.text, rt_.cfg.split, rt_.dictionary,
                                    rt_.catalog.digest(), rt_.gw->embedder_id());
  if (cache_) {
    if (auto hit = cache_->get(key)) return *hit;
  }
  PreparedDocument prepared;
  prepared.doc = ingest::build_document(input, rt_.dictionary, rt_.cfg.split, *rt_.gw,
                                        rt_.catalog, rt_.cfg.retrieval_k);
  prepared.index = retrieval::build_index(prepared.doc.passage_texts(), *rt_.gw);
  if (cache_) cache_->put(key, prepared.doc, prepared.index);
  return prepared;
}

dims::ExtractionMeta Pipeline::meta() const {
  return {rt_.gw->model_id(), rt_.catalog.digest(), rt_.cfg.timestamp()};
}

dims::DimensionRecord Pipeline::analyze(const PreparedDocument& prepared,
                                        const std::string& dimension) {
  chain::ChainEngine engine(prepared.doc, prepared.index, *rt_.gw, rt_.catalog);
  return dims::extract_dimension(engine, dimension, rt_.categories, prepared.doc.id,
                                 meta());
}

std::vector<dims::DimensionRecord> Pipeline::analyze_all(const PreparedDocument& prepared) {
  chain::ChainEngine engine(prepared.doc, prepared.index, *rt_.gw, rt_.catalog);
  return dims::extract_all(engine, rt_.categories, prepared.doc.id, meta());
}

completeness::CompletenessReport Pipeline::report(
    const std::vector<dims::DimensionRecord>& records) {
  const bool entailment = rt_.cfg.completeness_mode == "entailment";
  return completeness::assess(records,
                              entailment ? completeness::Mode::Entailment
                                         : completeness::Mode::Sentinel,
                              entailment ? rt_.gw.get() : nullptr, &rt_.hypotheses);
}

ingest::RawInput load_raw_input(const std::filesystem::path& text_path,
                                const std::filesystem::path& tables_path) {
  std::ifstream in(text_path);
  if (!in) throw std::runtime_error("cannot open input file: " + text_path.string());
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  ingest::RawInput input;
  input.text = std::move(text);
  if (!tables_path.empty()) {
    std::ifstream tin(tables_path);
    if (!tin) throw std::runtime_error("cannot open tables file: " + tables_path.string());
    const json j = json::parse(tin);
    for (const auto& tj : j) {
      ingest::ParsedTable table;
      table.caption = tj.value("caption", "");
      table.rows = tj.at("rows").get<std::vector<std::vector<std::string>>>();
      table.source_position = tj.value("source_position", "unknown");
      input.tables.push_back(std::move(table));
    }
  }
  return input;
}

int run_analyze(const config::AppConfig& cfg, const std::filesystem::path& input,
                const std::filesystem::path& tables, const std::string& dimension,
                const std::filesystem::path& out) {
  try {
    if (dimension != "all" && !dims::is_dimension(dimension)) {
      fprintf(stderr, "unknown dimension '%s'\n", dimension.c_str());
      return 1;
    }
    config::Runtime rt = config::build_runtime(cfg);
    Pipeline pipe(rt);
    const PreparedDocument prepared = pipe.prepare(load_raw_input(input, tables));

    std::vector<dims::DimensionRecord> records;
    if (dimension == "all") {
      records = pipe.analyze_all(prepared);
    } else {
      records.push_back(pipe.analyze(prepared, dimension));
    }
    const completeness::CompletenessReport report = pipe.report(records);

    json records_json = json::array();
    bool partial = false;
    for (const auto& record : records) {
      if (record.error) partial = true;
      records_json.push_back(record.to_json());
    }
    json output = {{"document_id", prepared.doc.id},
                   {"records", std::move(records_json)},
                   {"completeness", report.to_json()}};
    std::ofstream os(out, std::ios::trunc);
    if (!os) throw std::runtime_error("cannot write output file: " + out.string());
    os << output.dump(2) << "\n";
    return partial ? 2 : 0;
  } catch (const std::exception& e) {
    fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace datadoc::pipeline
