#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "datadoc/config.hpp"
#include "datadoc/pipeline.hpp"

namespace httplib {
class Server;
}

namespace datadoc::service {

/// HTTP front end over the pipeline. Single process; documents and their
/// per-dimension records are held in memory, preprocessed artifacts go
/// through the on-disk cache when one is configured.
///
/// Routes:
///   POST /documents            {text, tables?} -> {document_id, cache_hit}
///   POST /analyze/<dimension>  {document_id} or {text, tables?} -> AnalyzeResponse
///   GET  /report/<document_id> -> CompletenessReport
class Service {
 public:
  explicit Service(config::Runtime& rt);
  ~Service();

  /// Bind to an ephemeral port; pair with run(). Returns the port.
  int bind_any(const std::string& host = "127.0.0.1");
  void run();  // blocking
  bool listen(const std::string& host, int port);  // bind + run, blocking
  void wait_ready();
  void stop();

 private:
  struct DocumentState {
    pipeline::PreparedDocument prepared;
    std::map<std::string, dims::DimensionRecord> records;  // dimension -> latest
  };

  void setup_routes();

  config::Runtime& rt_;
  pipeline::Pipeline pipe_;
  std::unique_ptr<httplib::Server> server_;
  std::map<std::string, DocumentState> documents_;
  std::mutex mu_;
};

}  // namespace datadoc::service
