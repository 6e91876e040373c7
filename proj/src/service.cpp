#include "cmrx/service.hpp"

#include <fstream>

#include <httplib.h>

#include "cmrx/eval.hpp"
#include "cmrx/synth.hpp"

namespace cmrx {

using ojson = nlohmann::ordered_json;

namespace {

void send_json(httplib::Response& res, int status, const ojson& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, {{"error", message}});
}

std::optional<ojson> parse_body(const httplib::Request& req, httplib::Response& res) {
  auto j = ojson::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    send_error(res, 400, "request body must be a JSON object");
    return std::nullopt;
  }
  return j;
}

ojson items_json(const std::vector<ReviewItem>& items) {
  ojson out = ojson::array();
  for (const auto& it : items) out.push_back(to_json(it));
  return out;
}

ojson formulas_json(const std::vector<Formula>& ledger, const CmrRecord& r) {
  ojson out = ojson::array();
  for (const auto& f : ledger) {
    ojson operands = ojson::array();
    for (auto op : f.operands) operands.push_back(std::string(key_of(op)));
    auto rhs = f.evaluate(r);
    out.push_back({{"id", f.id},
                   {"lhs", std::string(key_of(f.lhs))},
                   {"operands", operands},
                   {"expression", f.rhs.source()},
                   {"rhs", rhs ? ojson(*rhs) : ojson(nullptr)}});
  }
  return out;
}

}  // namespace

Service::Service(PipelineConfig cfg) : pipeline_(cfg), store_(cfg.data_dir), server_(std::make_unique<httplib::Server>()) {
  if (cfg.gold_path) gold_ = load_gold(*cfg.gold_path);
  routes();
}

Service::Service(PipelineConfig cfg, std::shared_ptr<Completer> completer)
    : pipeline_(cfg, std::move(completer)), store_(cfg.data_dir), server_(std::make_unique<httplib::Server>()) {
  if (cfg.gold_path) gold_ = load_gold(*cfg.gold_path);
  routes();
}

Service::~Service() { stop(); }

bool Service::listen(const std::string& host, int port) { return server_->listen(host, port); }
int Service::bind_any(const std::string& host) { return server_->bind_to_any_port(host); }
bool Service::listen_after_bind() { return server_->listen_after_bind(); }
void Service::stop() {
  if (server_ && server_->is_running()) server_->stop();
}
void Service::wait_until_ready() const { server_->wait_until_ready(); }

void Service::set_gold(std::map<std::string, CmrRecord> gold) {
  std::lock_guard lock(mutation_mu_);
  gold_ = std::move(gold);
}

void Service::routes() {
  auto& srv = *server_;
  const auto& cfg = pipeline_.config();

  if (cfg.bearer_token) {
    const std::string expected = "Bearer " + *cfg.bearer_token;
    srv.set_pre_routing_handler([expected](const httplib::Request& req, httplib::Response& res) {
      if (req.path.rfind("/v1/", 0) != 0) return httplib::Server::HandlerResponse::Unhandled;
      if (req.get_header_value("Authorization") == expected) return httplib::Server::HandlerResponse::Unhandled;
      send_error(res, 401, "missing or wrong bearer token");
      return httplib::Server::HandlerResponse::Handled;
    });
  }

  if (cfg.static_dir) srv.set_mount_point("/", cfg.static_dir->string());

  srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });

  srv.Post("/v1/extract", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req, res);
    if (!body) return;
    if (!body->contains("text") || !(*body)["text"].is_string()) return send_error(res, 400, "'text' must be a string");
    std::string report_id;
    if (body->contains("report_id")) {
      if (!(*body)["report_id"].is_string()) return send_error(res, 400, "'report_id' must be a string");
      report_id = (*body)["report_id"].get<std::string>();
    }

    ProcessedReport pr;
    try {
      pr = pipeline_.process(report_id, (*body)["text"].get<std::string>());
    } catch (const TransportError& e) {
      return send_error(res, 502, e.what());
    }

    std::vector<ReviewItem> items;
    {
      std::lock_guard lock(mutation_mu_);
      items = pr.result ? store_.enqueue(pr.result->record, pr.result->bundle, pr.report_id, pr.scrubbed_text)
                        : store_.enqueue_invalid(pr.report_id, pr.scrubbed_text);
    }

    ojson out;
    out["report_id"] = pr.report_id;
    if (pr.result) {
      out["record"] = record_to_json(pr.result->record);
      out["confidence_bundle"] = bundle_to_json(pr.result->bundle);
      ojson flagged = ojson::array();
      for (auto f : pr.result->bundle.flagged()) flagged.push_back(std::string(key_of(f)));
      out["flagged_fields"] = flagged;
    } else {
      out["record"] = nullptr;
      out["confidence_bundle"] = nullptr;
      out["flagged_fields"] = ojson::array();
      out["error"] = "no sample produced a parseable record";
    }
    out["review_items"] = items_json(items);
    send_json(res, 200, out);
  });

  srv.Get("/v1/review/queue", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<ReviewStatus> status = ReviewStatus::Pending;
    if (req.has_param("status")) {
      const auto s = req.get_param_value("status");
      if (s == "all") {
        status.reset();
      } else {
        status = status_from_name(s);
        if (!status) return send_error(res, 400, "unknown status '" + s + "'");
      }
    }
    ojson out;
    out["items"] = items_json(store_.queue(status));
    ojson counts = ojson::object();
    for (const auto& [s, n] : store_.status_counts()) counts[std::string(status_name(s))] = n;
    out["counts"] = counts;
    send_json(res, 200, out);
  });

  srv.Post(R"(/v1/review/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = parse_body(req, res);
    if (!body) return;
    ReviewDecision d;
    d.item_id = req.matches[1];
    try {
      const auto verdict = body->value("verdict", std::string{});
      if (verdict == "accept") {
        d.verdict = ReviewDecision::Verdict::Accept;
      } else if (verdict == "correct") {
        d.verdict = ReviewDecision::Verdict::Correct;
        if (body->contains("new_record")) {
          auto rec = parse_record((*body)["new_record"].dump());
          if (!is_record(rec)) return send_error(res, 400, "new_record: " + std::get<ParseError>(rec).message);
          d.new_record = std::get<CmrRecord>(rec);
        } else if (!body->contains("new_value")) {
          return send_error(res, 400, "'correct' needs new_value");
        } else if ((*body)["new_value"].is_null()) {
          d.new_value = FieldValue::null();
        } else if ((*body)["new_value"].is_number()) {
          d.new_value = FieldValue::present((*body)["new_value"].get<double>());
        } else {
          return send_error(res, 400, "new_value must be a number or null");
        }
      } else {
        return send_error(res, 400, "verdict must be 'accept' or 'correct'");
      }
      d.reviewer = body->value("reviewer", std::string{});
      if (d.reviewer.empty()) return send_error(res, 400, "'reviewer' is required");
    } catch (const std::exception& e) {
      return send_error(res, 400, e.what());
    }

    try {
      CmrRecord updated;
      {
        std::lock_guard lock(mutation_mu_);
        updated = store_.apply_decision(d);
      }
      auto item = store_.item(d.item_id);
      ojson out = to_json(*item);
      out["record"] = record_to_json(updated);
      send_json(res, 200, out);
    } catch (const TriageError& e) {
      switch (e.kind()) {
        case TriageError::Kind::NotFound: return send_error(res, 404, e.what());
        case TriageError::Kind::AlreadyDecided: return send_error(res, 409, e.what());
        case TriageError::Kind::InvalidValue: return send_error(res, 400, e.what());
      }
    }
  });

  srv.Get(R"(/v1/reports/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto rep = store_.report(id);
    if (!rep) return send_error(res, 404, "unknown report '" + id + "'");
    ojson out;
    out["report_id"] = rep->report_id;
    out["text"] = rep->text;
    out["extracted"] = rep->extracted ? record_to_json(*rep->extracted) : ojson(nullptr);
    out["record"] = record_to_json(rep->record);
    out["confidence_bundle"] = rep->bundle ? bundle_to_json(*rep->bundle) : ojson(nullptr);
    ojson items = ojson::array();
    for (const auto& it : store_.queue(std::nullopt))
      if (it.report_id == id) items.push_back(to_json(it));
    out["review_items"] = items;
    out["formulas"] = formulas_json(pipeline_.ledger(), rep->record);
    send_json(res, 200, out);
  });

  srv.Get("/v1/metrics", [this](const httplib::Request&, httplib::Response& res) {
    std::map<std::string, CmrRecord> gold;
    {
      std::lock_guard lock(mutation_mu_);
      gold = gold_;
    }
    if (gold.empty()) return send_error(res, 404, "no gold records loaded");

    std::vector<CmrRecord> golds;
    std::vector<ParseOutcome> preds;
    std::vector<DiagnosisCategory> gold_cats, pred_cats;
    std::vector<ErrorLabel> labels;
    std::vector<double> scores;
    for (const auto& id : store_.report_ids()) {
      auto g = gold.find(id);
      if (g == gold.end()) continue;
      auto rep = store_.report(id);
      ParseOutcome pred = rep->extracted ? ParseOutcome{*rep->extracted}
                                         : ParseOutcome{ParseError{ParseError::Kind::Invalid, "unparseable"}};
      golds.push_back(g->second);
      gold_cats.push_back(g->second.category);
      pred_cats.push_back(rep->extracted ? rep->extracted->category : DiagnosisCategory::Unspecified);
      if (rep->bundle) {
        auto l = classify_record(g->second, pred);
        for (std::size_t i = 0; i < kFieldCount; ++i) {
          labels.push_back(l[i]);
          scores.push_back(rep->bundle->fields[i].final);
        }
      }
      preds.push_back(std::move(pred));
    }

    ojson out;
    out["n_paired"] = golds.size();
    out["extraction"] = to_json(extraction_metrics(golds, preds));
    out["classification"] = golds.empty() ? ojson(nullptr) : to_json(classification_metrics(gold_cats, pred_cats));
    out["discrimination"] = to_json(confidence_discrimination(labels, scores, pipeline_.config().params.review_threshold));
    send_json(res, 200, out);
  });

  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, 500, e.what());
    } catch (...) {
      send_error(res, 500, "internal error");
    }
  });
}

std::map<std::string, CmrRecord> load_gold(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open gold corpus '" + path.string() + "'");
  std::map<std::string, CmrRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      auto rep = synth_report_from_json(ojson::parse(line));
      out[rep.report_id] = rep.gold;
    } catch (const std::exception& e) {
      throw ConfigError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace cmrx
