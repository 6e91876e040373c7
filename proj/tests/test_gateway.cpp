#include <doctest.h>

#include <atomic>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cmrx/gateway.hpp"
#include "cmrx/synth.hpp"

using namespace cmrx;
using json = nlohmann::json;

namespace {

CmrRecord some_gold(std::uint64_t seed = 1) {
  SynthOptions o;
  o.null_rate = 0.1;
  return sample_gold(seed, DiagnosisCategory::PAH, default_reference_table(), default_ledger(), o);
}

class ConstCompleter : public Completer {
 public:
  explicit ConstCompleter(std::string out, int bad_attempt = -1) : out_(std::move(out)), bad_(bad_attempt) {}
  std::string complete(const std::string&, double, int attempt) override {
    return attempt == bad_ ? std::string("{\"HEIGHT\": 1") : out_;
  }

 private:
  std::string out_;
  int bad_;
};

// Fake inference server on an ephemeral port.
class FakeServer {
 public:
  FakeServer() {
    port_ = srv_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { srv_.listen_after_bind(); });
    srv_.wait_until_ready();
  }
  ~FakeServer() {
    srv_.stop();
    thread_.join();
  }
  httplib::Server& srv() { return srv_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  httplib::Server srv_;
  int port_ = 0;
  std::thread thread_;
};

std::string chat_reply(const std::string& content) {
  return json{{"choices", json::array({json{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

EndpointConfig fast_cfg(const std::string& url) {
  EndpointConfig c;
  c.base_url = url;
  c.backoff_base_ms = 1;
  c.timeout_s = 5;
  return c;
}

}  // namespace

TEST_CASE("prompt contains every description and the report verbatim") {
  const std::string report = "LVEF 60 %\n  odd   spacing\tkept";
  const auto prompt = build_prompt(report);
  for (const auto& s : field_specs()) {
    CHECK(prompt.find(s.description) != std::string::npos);
    CHECK(prompt.find(std::string(s.key)) != std::string::npos);
  }
  CHECK(prompt.find(report) != std::string::npos);
  CHECK(prompt == build_prompt(report));
  CHECK(report_from_prompt(prompt) == report);

  const auto empty = build_prompt("");
  for (const auto& s : field_specs()) CHECK(empty.find(s.description) != std::string::npos);
  CHECK(report_from_prompt(empty) == "");
}

TEST_CASE("single-field prompt") {
  const auto p = build_field_prompt("LVEF 60", spec_of(FieldId::LVEF));
  CHECK(p.find(spec_of(FieldId::LVEF).description) != std::string::npos);
  CHECK(report_from_prompt(p) == "LVEF 60");
}

TEST_CASE("record schema lists all keys") {
  const auto schema = json::parse(record_json_schema());
  for (auto f : all_fields()) CHECK(schema["properties"].contains(std::string(key_of(f))));
  CHECK(schema["required"].size() >= 52);
}

TEST_CASE("mock_extract") {
  const auto gold = some_gold();
  CHECK(mock_extract("r", gold, NoiseProfile{}) == serialize_record(gold));

  NoiseProfile drop;
  drop.force_dropout = {FieldId::LVEF};
  auto out = parse_record(mock_extract("r", gold, drop));
  REQUIRE(is_record(out));
  auto expected = gold;
  expected[FieldId::LVEF] = FieldValue::null();
  CHECK(std::get<CmrRecord>(out) == expected);

  NoiseProfile trunc;
  trunc.truncation_rate = 1;
  CHECK_FALSE(is_record(parse_record(mock_extract("r", gold, trunc))));

  NoiseProfile jit;
  jit.jitter_rate = 0.5;
  jit.seed = 3;
  CHECK(mock_extract("r", gold, jit) == mock_extract("r", gold, jit));
}

TEST_CASE("jitter stays within its magnitude") {
  const auto gold = some_gold(2);
  NoiseProfile jit;
  jit.jitter_rate = 1;
  jit.jitter_max = 0.1;
  for (std::uint64_t s = 0; s < 20; ++s) {
    jit.seed = s;
    const auto r = std::get<CmrRecord>(parse_record(mock_extract("r", gold, jit)));
    for (std::size_t i = 0; i < kFieldCount; ++i) {
      if (gold.values[i].is_null()) {
        CHECK(r.values[i].is_null());
        continue;
      }
      CHECK(std::fabs(r.values[i].value() - gold.values[i].value()) <= 0.1 * gold.values[i].value() + 1e-12);
    }
  }
}

TEST_CASE("extract_sampled: constant mock gives three identical records") {
  const auto gold = some_gold();
  ConstCompleter c(serialize_record(gold));
  for (bool parallel : {true, false}) {
    EndpointConfig cfg;
    cfg.parallel_samples = parallel;
    const auto set = extract_sampled("report", c, cfg, 3, 0.3, "id1");
    REQUIRE(set.attempts.size() == 3);
    for (const auto& a : set.attempts) {
      REQUIRE(is_record(a));
      CHECK(std::get<CmrRecord>(a) == gold);
    }
    CHECK(set.report_id == "id1");
  }
}

TEST_CASE("extract_sampled: malformed second attempt is kept in place") {
  ConstCompleter c(serialize_record(some_gold()), 1);
  const auto set = extract_sampled("report", c, EndpointConfig{}, 3);
  CHECK(is_record(set.attempts[0]));
  CHECK_FALSE(is_record(set.attempts[1]));
  CHECK(std::get<ParseError>(set.attempts[1]).kind == ParseError::Kind::Invalid);
  CHECK(is_record(set.attempts[2]));
}

TEST_CASE("extract_sampled: code fences around the JSON are tolerated") {
  const auto gold = some_gold();
  ConstCompleter c("```json\n" + serialize_record(gold) + "\n```");
  const auto set = extract_sampled("report", c, EndpointConfig{}, 1);
  REQUIRE(is_record(set.attempts[0]));
  CHECK(std::get<CmrRecord>(set.attempts[0]) == gold);
}

TEST_CASE("MockCompleter echoes the rule extraction of the prompted report") {
  const auto gold = some_gold(4);
  const auto text = render_report(gold, TemplateStyle::Narrative, 4);
  MockCompleter m;
  const auto set = extract_sampled(text, m, EndpointConfig{}, 3);
  for (const auto& a : set.attempts) {
    REQUIRE(is_record(a));
    CHECK(std::get<CmrRecord>(a) == gold);
  }
}

TEST_CASE("per-field prompting assembles the same record") {
  const auto gold = some_gold(5);
  const auto text = render_report(gold, TemplateStyle::Tabular, 5);
  MockCompleter m;
  EndpointConfig cfg;
  cfg.per_field_prompts = true;
  const auto set = extract_sampled(text, m, cfg, 2);
  for (const auto& a : set.attempts) {
    REQUIRE(is_record(a));
    CHECK(std::get<CmrRecord>(a) == gold);
  }
}

TEST_CASE("HTTP completer: wire format") {
  FakeServer fs;
  json seen;
  fs.srv().Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen = json::parse(req.body);
    res.set_content(chat_reply("hello"), "application/json");
  });
  auto cfg = fast_cfg(fs.url());
  cfg.model_name = "m1";
  HttpCompleter c(cfg);
  CHECK(c.complete("PROMPT", 0.3, 0) == "hello");
  CHECK(seen["model"] == "m1");
  CHECK(seen["temperature"].get<double>() == 0.3);
  CHECK(seen["messages"][0]["role"] == "user");
  CHECK(seen["messages"][0]["content"] == "PROMPT");
  CHECK_FALSE(seen.contains("response_format"));

  cfg.structured_mode = true;
  HttpCompleter s(cfg);
  s.complete("P", 0.3, 0);
  CHECK(seen["response_format"]["type"] == "json_schema");
  CHECK(seen["response_format"]["json_schema"]["schema"]["properties"].contains("LVEF"));
}

TEST_CASE("HTTP completer: retries 5xx and 429, then succeeds") {
  FakeServer fs;
  std::atomic<int> calls{0};
  fs.srv().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    const int n = calls++;
    if (n == 0) res.status = 503;
    else if (n == 1) res.status = 429;
    else res.set_content(chat_reply("ok"), "application/json");
  });
  auto cfg = fast_cfg(fs.url());
  cfg.max_retries = 2;
  HttpCompleter c(cfg);
  CHECK(c.complete("p", 0.3, 0) == "ok");
  CHECK(calls == 3);
}

TEST_CASE("HTTP completer: gives up after max_retries") {
  FakeServer fs;
  std::atomic<int> calls{0};
  fs.srv().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 500;
  });
  auto cfg = fast_cfg(fs.url());
  cfg.max_retries = 1;
  HttpCompleter c(cfg);
  CHECK_THROWS_AS(c.complete("p", 0.3, 0), TransportError);
  CHECK(calls == 2);
}

TEST_CASE("HTTP completer: 4xx is not retried; malformed envelope is a transport error") {
  FakeServer fs;
  std::atomic<int> calls{0};
  fs.srv().Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
    ++calls;
    res.status = 400;
  });
  fs.srv().Post("/odd", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"nope\":1}", "application/json");
  });
  HttpCompleter c(fast_cfg(fs.url()));
  CHECK_THROWS_AS(c.complete("p", 0.3, 0), TransportError);
  CHECK(calls == 1);
  auto cfg = fast_cfg(fs.url());
  cfg.api_path = "/odd";
  HttpCompleter odd(cfg);
  CHECK_THROWS_AS(odd.complete("p", 0.3, 0), TransportError);
}

TEST_CASE("HTTP completer: unreachable endpoint") {
  auto cfg = fast_cfg("http://127.0.0.1:1");
  cfg.max_retries = 1;
  cfg.timeout_s = 1;
  HttpCompleter c(cfg);
  CHECK_THROWS_AS(c.complete("p", 0.3, 0), TransportError);
  CHECK_THROWS_AS(extract_sampled("r", c, cfg, 3), TransportError);
}

TEST_CASE("endpoint config from environment and validation") {
  setenv("ENDPOINT_URL", "http://example.invalid:9", 1);
  setenv("MAX_RETRIES", "5", 1);
  setenv("STRUCTURED_MODE", "true", 1);
  const auto c = EndpointConfig::from_env(EndpointConfig{});
  CHECK(c.base_url == "http://example.invalid:9");
  CHECK(c.max_retries == 5);
  CHECK(c.structured_mode);
  unsetenv("ENDPOINT_URL");
  unsetenv("MAX_RETRIES");
  unsetenv("STRUCTURED_MODE");

  EndpointConfig bad;
  bad.timeout_s = 0;
  CHECK_THROWS(bad.validate());
}
