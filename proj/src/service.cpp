#include "datadoc/service.hpp"

#include <chrono>

#include "httplib.h"
#include "json.hpp"

namespace datadoc::service {

using nlohmann::json;

namespace {

void reply_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply_json(res, status, json{{"error", message}});
}

ingest::RawInput input_from_body(const json& body) {
  ingest::RawInput input;
  input.text = body.value("text", "");
  if (body.contains("tables")) {
    for (const auto& tj : body.at("tables")) {
      ingest::ParsedTable table;
      table.caption = tj.value("caption", "");
      table.rows = tj.at("rows").get<std::vector<std::vector<std::string>>>();
      table.source_position = tj.value("source_position", "unknown");
      input.tables.push_back(std::move(table));
    }
  }
  return input;
}

double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
      .count();
}

}  // namespace

Service::Service(config::Runtime& rt)
    : rt_(rt), pipe_(rt), server_(std::make_unique<httplib::Server>()) {
  setup_routes();
}

Service::~Service() { stop(); }

void Service::setup_routes() {
  server_->Post("/documents", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      reply_error(res, 400, "request body must be JSON");
      return;
    }
    if (body.value("text", "").empty()) {
      reply_error(res, 400, "text must be non-empty");
      return;
    }
    try {
      pipeline::PreparedDocument prepared = pipe_.prepare(input_from_body(body));
      const std::string id = prepared.doc.id;
      const bool cache_hit = prepared.cache_hit;
      {
        std::lock_guard<std::mutex> lock(mu_);
        documents_.try_emplace(id, DocumentState{std::move(prepared), {}});
      }
      reply_json(res, 200, json{{"document_id", id}, {"cache_hit", cache_hit}});
    } catch (const gateway::BackendError& e) {
      reply_error(res, 502, e.what());
    } catch (const std::exception& e) {
      reply_error(res, 400, e.what());
    }
  });

  server_->Post(R"(/analyze/([A-Za-z_]+))",
                [this](const httplib::Request& req, httplib::Response& res) {
    const std::string dimension = req.matches[1];
    if (!dims::is_dimension(dimension)) {
      reply_error(res, 404, "unknown dimension '" + dimension + "'");
      return;
    }
    json body;
    try {
      body = json::parse(req.body.empty() ? "{}" : req.body);
    } catch (const json::exception&) {
      reply_error(res, 400, "request body must be JSON");
      return;
    }
    const auto t0 = std::chrono::steady_clock::now();
    std::string id;
    bool cache_hit = false;
    try {
      if (body.contains("document_id")) {
        id = body.at("document_id").get<std::string>();
        std::lock_guard<std::mutex> lock(mu_);
        auto it = documents_.find(id);
        if (it == documents_.end()) {
          reply_error(res, 404, "unknown document '" + id + "'");
          return;
        }
        cache_hit = true;  // preprocessing reused from the stored document
      } else if (!body.value("text", "").empty()) {
        pipeline::PreparedDocument prepared = pipe_.prepare(input_from_body(body));
        id = prepared.doc.id;
        cache_hit = prepared.cache_hit;
        std::lock_guard<std::mutex> lock(mu_);
        documents_.try_emplace(id, DocumentState{std::move(prepared), {}});
      } else {
        reply_error(res, 400, "provide document_id or text");
        return;
      }
    } catch (const gateway::BackendError& e) {
      reply_error(res, 502, e.what());
      return;
    }
    const double prepare_ms = ms_since(t0);

    pipeline::PreparedDocument prepared;
    {
      std::lock_guard<std::mutex> lock(mu_);
      prepared = documents_.at(id).prepared;
    }
    const auto t1 = std::chrono::steady_clock::now();
    dims::DimensionRecord record = pipe_.analyze(prepared, dimension);
    const double analyze_ms = ms_since(t1);
    {
      std::lock_guard<std::mutex> lock(mu_);
      documents_.at(id).records.insert_or_assign(dimension, record);
    }
    json response = {{"document_id", id},
                     {"dimension", dimension},
                     {"record", record.to_json()},
                     {"cache_hit", cache_hit},
                     {"timings", {{"prepare_ms", prepare_ms}, {"analyze_ms", analyze_ms}}}};
    // a chain abort is a backend problem; the partial record still ships
    reply_json(res, record.error ? 502 : 200, response);
  });

  server_->Get(R"(/report/([0-9a-f]+))",
               [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    std::vector<dims::DimensionRecord> records;
    {
      std::lock_guard<std::mutex> lock(mu_);
      auto it = documents_.find(id);
      if (it == documents_.end()) {
        reply_error(res, 404, "unknown document '" + id + "'");
        return;
      }
      for (const auto& [dimension, record] : it->second.records) {
        records.push_back(record);
      }
    }
    if (records.empty()) {
      reply_error(res, 404, "no dimensions analyzed for document '" + id + "'");
      return;
    }
    try {
      reply_json(res, 200, pipe_.report(records).to_json());
    } catch (const gateway::BackendError& e) {
      reply_error(res, 502, e.what());
    }
  });
}

int Service::bind_any(const std::string& host) {
  return server_->bind_to_any_port(host.c_str());
}

void Service::run() { server_->listen_after_bind(); }

bool Service::listen(const std::string& host, int port) {
  return server_->listen(host.c_str(), port);
}

void Service::wait_ready() { server_->wait_until_ready(); }

void Service::stop() {
  if (server_) server_->stop();
}

}  // namespace datadoc::service
