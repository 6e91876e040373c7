#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "cmrx/pipeline.hpp"
#include "cmrx/triage.hpp"

namespace httplib {
class Server;
}

namespace cmrx {

/// HTTP front end:
///   POST /v1/extract            {text, report_id?} -> {report_id, record, confidence_bundle, flagged_fields}
///   GET  /v1/review/queue       ?status=pending|accepted|corrected|all
///   POST /v1/review/{item_id}   {verdict, new_value?, reviewer}
///   GET  /v1/reports/{id}
///   GET  /v1/metrics            (404 unless gold records were loaded)
///   GET  /healthz
class Service {
 public:
  Service(PipelineConfig cfg);
  Service(PipelineConfig cfg, std::shared_ptr<Completer> completer);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves until stop(); blocks.
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and returns it (serve with listen_after_bind()).
  int bind_any(const std::string& host);
  bool listen_after_bind();
  void stop();
  void wait_until_ready() const;

  TriageStore& store() { return store_; }
  void set_gold(std::map<std::string, CmrRecord> gold);

 private:
  void routes();

  Pipeline pipeline_;
  TriageStore store_;
  std::unique_ptr<httplib::Server> server_;
  std::mutex mutation_mu_;  // store mutations are single-writer
  std::map<std::string, CmrRecord> gold_;
};

/// Reads a synthetic-corpus ndjson into report_id -> gold record.
std::map<std::string, CmrRecord> load_gold(const std::filesystem::path& path);

}  // namespace cmrx
