#include "cmrx/pipeline.hpp"

#include <atomic>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>

#include "cmrx/rng.hpp"
#include "cmrx/scrub.hpp"

namespace cmrx {

using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

void PipelineConfig::validate() const {
  try {
    endpoint.validate();
    params.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (workers < 1) throw ConfigError("worker-pool width must be >= 1");
  if (listen_port < 0 || listen_port > 65535) throw ConfigError("listen port out of range");
  for (const auto& p : {ranges_path, ledger_path, static_dir, gold_path})
    if (p && !fs::exists(*p)) throw ConfigError("path does not exist: " + p->string());
}

PipelineConfig PipelineConfig::from_json(const ojson& j, PipelineConfig c) {
  try {
    if (j.contains("endpoint")) {
      const auto& e = j["endpoint"];
      c.endpoint.base_url = e.value("base_url", c.endpoint.base_url);
      c.endpoint.api_path = e.value("api_path", c.endpoint.api_path);
      c.endpoint.model_name = e.value("model_name", c.endpoint.model_name);
      c.endpoint.timeout_s = e.value("timeout_s", c.endpoint.timeout_s);
      c.endpoint.max_retries = e.value("max_retries", c.endpoint.max_retries);
      c.endpoint.structured_mode = e.value("structured_mode", c.endpoint.structured_mode);
      c.endpoint.per_field_prompts = e.value("per_field_prompts", c.endpoint.per_field_prompts);
      c.endpoint.backoff_base_ms = e.value("backoff_base_ms", c.endpoint.backoff_base_ms);
    }
    if (j.contains("params")) {
      const auto& p = j["params"];
      c.params.alpha = p.value("alpha", c.params.alpha);
      c.params.beta = p.value("beta", c.params.beta);
      c.params.default_score = p.value("default_score", c.params.default_score);
      c.params.review_threshold = p.value("review_threshold", c.params.review_threshold);
      c.params.n_samples = p.value("n_samples", c.params.n_samples);
      c.params.temperature = p.value("temperature", c.params.temperature);
    }
    if (j.contains("mock_noise")) {
      const auto& n = j["mock_noise"];
      c.mock_noise.dropout = n.value("dropout", 0.0);
      c.mock_noise.jitter_rate = n.value("jitter_rate", 0.0);
      c.mock_noise.jitter_max = n.value("jitter_max", 0.10);
      c.mock_noise.swap_rate = n.value("swap_rate", 0.0);
      c.mock_noise.truncation_rate = n.value("truncation_rate", 0.0);
      c.mock_noise.seed = n.value("seed", std::uint64_t{0});
    }
    if (j.contains("data_dir")) c.data_dir = j["data_dir"].get<std::string>();
    if (j.contains("ranges_path")) c.ranges_path = j["ranges_path"].get<std::string>();
    if (j.contains("ledger_path")) c.ledger_path = j["ledger_path"].get<std::string>();
    if (j.contains("static_dir")) c.static_dir = j["static_dir"].get<std::string>();
    if (j.contains("gold_path")) c.gold_path = j["gold_path"].get<std::string>();
    if (j.contains("bearer_token")) c.bearer_token = j["bearer_token"].get<std::string>();
    c.workers = j.value("workers", c.workers);
    c.listen_host = j.value("listen_host", c.listen_host);
    c.listen_port = j.value("listen_port", c.listen_port);
    c.mock = j.value("mock", c.mock);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  return c;
}

PipelineConfig PipelineConfig::from_json(const ojson& j) { return from_json(j, PipelineConfig{}); }

PipelineConfig PipelineConfig::from_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  auto j = ojson::parse(in, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ConfigError("config file '" + path.string() + "' is not a JSON object");
  return from_json(j);
}

namespace {

std::shared_ptr<Completer> make_completer(const PipelineConfig& cfg) {
  if (cfg.mock) return std::make_shared<MockCompleter>(cfg.mock_noise);
  return std::make_shared<HttpCompleter>(cfg.endpoint);
}

}  // namespace

Pipeline::Pipeline(PipelineConfig cfg) : Pipeline(cfg, make_completer(cfg)) {}

Pipeline::Pipeline(PipelineConfig cfg, std::shared_ptr<Completer> completer)
    : cfg_(std::move(cfg)), completer_(std::move(completer)) {
  cfg_.validate();
  try {
    ranges_ = cfg_.ranges_path ? ReferenceTable::load(cfg_.ranges_path->string()) : default_reference_table();
    ledger_ = cfg_.ledger_path ? load_ledger(cfg_.ledger_path->string()) : default_ledger();
  } catch (const LedgerError& e) {
    throw ConfigError(e.what());
  } catch (const ExprError& e) {
    throw ConfigError(e.what());
  }
}

SampleSet Pipeline::sample(const std::string& report_id, const std::string& scrubbed_text) {
  return extract_sampled(scrubbed_text, *completer_, cfg_.endpoint, cfg_.params.n_samples, cfg_.params.temperature,
                         report_id);
}

std::optional<Aggregate> Pipeline::score(const SampleSet& samples) const {
  try {
    return aggregate(samples, ranges_, ledger_, cfg_.params);
  } catch (const AllInvalidError&) {
    return std::nullopt;
  }
}

ProcessedReport Pipeline::process(const std::string& report_id, const std::string& raw_text) {
  ProcessedReport out;
  out.scrubbed_text = scrub_phi(raw_text);
  out.report_id = report_id.empty() ? default_report_id(out.scrubbed_text) : report_id;
  out.samples = sample(out.report_id, out.scrubbed_text);
  out.result = score(out.samples);
  return out;
}

std::vector<ProcessedReport> Pipeline::process_all(const std::vector<std::pair<std::string, std::string>>& reports) {
  std::vector<ProcessedReport> out(reports.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&] {
    for (;;) {
      const auto i = next.fetch_add(1);
      if (i >= reports.size()) return;
      try {
        out[i] = process(reports[i].first, reports[i].second);
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
        next = reports.size();
        return;
      }
    }
  };
  const auto width = std::min<std::size_t>(static_cast<std::size_t>(cfg_.workers), std::max<std::size_t>(reports.size(), 1));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < width; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::string default_report_id(const std::string& text) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep-%016llx", static_cast<unsigned long long>(hash_text(text)));
  return buf;
}

ojson sample_set_to_json(const SampleSet& s) {
  ojson j;
  j["report_id"] = s.report_id;
  j["temperature"] = s.temperature;
  ojson attempts = ojson::array();
  for (const auto& a : s.attempts) {
    if (const auto* r = std::get_if<CmrRecord>(&a)) {
      attempts.push_back({{"record", record_to_json(*r)}});
    } else {
      const auto& e = std::get<ParseError>(a);
      attempts.push_back({{"error",
                           {{"kind", e.kind == ParseError::Kind::Invalid ? "Invalid" : "SchemaViolation"},
                            {"message", e.message}}}});
    }
  }
  j["attempts"] = attempts;
  return j;
}

SampleSet sample_set_from_json(const ojson& j) {
  SampleSet s;
  s.report_id = j.at("report_id").get<std::string>();
  s.temperature = j.value("temperature", 0.3);
  for (const auto& a : j.at("attempts")) {
    if (a.contains("record")) {
      s.attempts.push_back(record_from_json(a["record"]));
    } else {
      const auto& e = a.at("error");
      s.attempts.push_back(ParseError{e.value("kind", "Invalid") == "Invalid" ? ParseError::Kind::Invalid
                                                                               : ParseError::Kind::SchemaViolation,
                                      e.value("message", "")});
    }
  }
  return s;
}

}  // namespace cmrx
