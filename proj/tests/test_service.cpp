#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cmrx/service.hpp"
#include "cmrx/synth.hpp"
#include "helpers.hpp"

using namespace cmrx;
using json = nlohmann::json;
using testutil::TempDir;

namespace {

class Running {
 public:
  Running(PipelineConfig cfg, std::shared_ptr<Completer> c) : svc_(std::move(cfg), std::move(c)) {
    port_ = svc_.bind_any("127.0.0.1");
    thread_ = std::thread([this] { svc_.listen_after_bind(); });
    svc_.wait_until_ready();
  }
  ~Running() {
    svc_.stop();
    thread_.join();
  }
  Service& svc() { return svc_; }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(10, 0);
    return c;
  }

 private:
  Service svc_;
  int port_ = 0;
  std::thread thread_;
};

PipelineConfig cfg_in(const TempDir& dir) {
  PipelineConfig c;
  c.data_dir = dir.path();
  return c;
}

CmrRecord gold_for(std::uint64_t seed) {
  SynthOptions o;
  o.null_rate = 0;
  return sample_gold(seed, DiagnosisCategory::HCM, default_reference_table(), default_ledger(), o);
}

// Mock that swaps LVEF for the LVEDV value in every sample (a confusion).
std::shared_ptr<Completer> confusing_mock() {
  return std::make_shared<MockCompleter>(
      [](std::string_view text) -> std::optional<CmrRecord> {
        auto r = rule_extract(text);
        r[FieldId::LVEF] = r[FieldId::LVEDV];
        return r;
      },
      NoiseProfile{});
}

}  // namespace

TEST_CASE("service: health, extract, report lookup") {
  TempDir dir;
  Running run(cfg_in(dir), std::make_shared<MockCompleter>());
  auto cli = run.client();

  auto h = cli.Get("/healthz");
  REQUIRE(h);
  CHECK(h->status == 200);
  CHECK(h->body == "ok");

  const auto gold = gold_for(1);
  const auto text = render_report(gold, TemplateStyle::Tabular, 1);
  auto res = cli.Post("/v1/extract", json{{"text", text}, {"report_id", "rep-1"}}.dump(), "application/json");
  REQUIRE(res);
  REQUIRE(res->status == 200);
  const auto body = json::parse(res->body);
  CHECK(body["report_id"] == "rep-1");
  CHECK(body["record"].size() == 53);
  for (auto f : all_fields()) CHECK(body["record"].contains(std::string(key_of(f))));
  auto parsed = parse_record(body["record"].dump());
  REQUIRE(is_record(parsed));
  CHECK(std::get<CmrRecord>(parsed) == gold);
  CHECK(body["flagged_fields"].empty());
  CHECK(body["confidence_bundle"]["LVEF"]["final"].get<double>() > 0.7);

  auto rep = cli.Get("/v1/reports/rep-1");
  REQUIRE(rep);
  CHECK(rep->status == 200);
  const auto rj = json::parse(rep->body);
  CHECK(rj["text"].get<std::string>().find("MRN") == std::string::npos);
  CHECK(rj["record"].size() == 53);
  CHECK(rj["formulas"].size() == 22);

  CHECK(cli.Get("/v1/reports/nope")->status == 404);
  CHECK(cli.Post("/v1/extract", "not json", "application/json")->status == 400);
  CHECK(cli.Post("/v1/extract", "{\"txt\":1}", "application/json")->status == 400);
  CHECK(cli.Get("/v1/metrics")->status == 404);
}

TEST_CASE("service: review flow and conflicts") {
  TempDir dir;
  Running run(cfg_in(dir), confusing_mock());
  auto cli = run.client();

  const auto text = render_report(gold_for(2), TemplateStyle::Narrative, 2);
  auto res = cli.Post("/v1/extract", json{{"text", text}, {"report_id", "r2"}}.dump(), "application/json");
  REQUIRE(res);
  REQUIRE(res->status == 200);
  const auto body = json::parse(res->body);
  CHECK(std::find(body["flagged_fields"].begin(), body["flagged_fields"].end(), "LVEF") != body["flagged_fields"].end());

  auto q = cli.Get("/v1/review/queue?status=pending");
  REQUIRE(q);
  const auto qj = json::parse(q->body);
  REQUIRE_FALSE(qj["items"].empty());
  double prev = -1;
  for (const auto& it : qj["items"]) {
    CHECK(it["confidence"].get<double>() >= prev);
    prev = it["confidence"].get<double>();
  }
  CHECK(qj["counts"]["pending"].get<int>() == static_cast<int>(qj["items"].size()));

  const std::string item = "r2:LVEF";
  auto d1 = cli.Post("/v1/review/" + item, json{{"verdict", "correct"}, {"new_value", 61.5}, {"reviewer", "a"}}.dump(),
                     "application/json");
  REQUIRE(d1);
  CHECK(d1->status == 200);
  const auto dj = json::parse(d1->body);
  CHECK(dj["status"] == "corrected");
  CHECK(dj["record"]["LVEF"].get<double>() == 61.5);

  auto d2 = cli.Post("/v1/review/" + item, json{{"verdict", "accept"}, {"reviewer", "b"}}.dump(), "application/json");
  REQUIRE(d2);
  CHECK(d2->status == 409);

  CHECK(cli.Post("/v1/review/r2:NOPE", json{{"verdict", "accept"}, {"reviewer", "b"}}.dump(), "application/json")->status ==
        404);
  CHECK(cli.Post("/v1/review/" + item, json{{"verdict", "maybe"}, {"reviewer", "b"}}.dump(), "application/json")->status ==
        400);
  CHECK(cli.Post("/v1/review/" + item, "{", "application/json")->status == 400);
  CHECK(cli.Get("/v1/review/queue?status=bogus")->status == 400);

  auto all = json::parse(cli.Get("/v1/review/queue?status=all")->body);
  CHECK(all["counts"]["corrected"] == 1);
}

TEST_CASE("service: metrics over gold-paired reports") {
  TempDir dir;
  Running run(cfg_in(dir), std::make_shared<MockCompleter>());
  auto cli = run.client();
  std::map<std::string, CmrRecord> gold;
  for (std::uint64_t i = 0; i < 4; ++i) {
    const auto g = gold_for(10 + i);
    const auto id = "g" + std::to_string(i);
    gold[id] = g;
    auto res = cli.Post("/v1/extract", json{{"text", render_report(g, TemplateStyle::Tabular, i)}, {"report_id", id}}.dump(),
                        "application/json");
    REQUIRE(res->status == 200);
  }
  run.svc().set_gold(gold);
  auto m = cli.Get("/v1/metrics");
  REQUIRE(m);
  REQUIRE(m->status == 200);
  const auto mj = json::parse(m->body);
  CHECK(mj["n_paired"] == 4);
  CHECK(mj["extraction"]["variable_accuracy"].get<double>() == 1.0);
  CHECK(mj["classification"]["accuracy"].get<double>() == 1.0);
}

TEST_CASE("service: unreachable inference endpoint maps to 502") {
  TempDir dir;
  auto cfg = cfg_in(dir);
  cfg.endpoint.base_url = "http://127.0.0.1:1";
  cfg.endpoint.max_retries = 0;
  cfg.endpoint.timeout_s = 1;
  Running run(cfg, std::make_shared<HttpCompleter>(cfg.endpoint));
  auto cli = run.client();
  auto res = cli.Post("/v1/extract", json{{"text", "LVEF 60"}}.dump(), "application/json");
  REQUIRE(res);
  CHECK(res->status == 502);
}

TEST_CASE("service: bearer token") {
  TempDir dir;
  auto cfg = cfg_in(dir);
  cfg.bearer_token = "s3cret";
  Running run(cfg, std::make_shared<MockCompleter>());
  auto cli = run.client();
  CHECK(cli.Get("/healthz")->status == 200);
  CHECK(cli.Get("/v1/review/queue")->status == 401);
  httplib::Headers auth{{"Authorization", "Bearer s3cret"}};
  CHECK(cli.Get("/v1/review/queue", auth)->status == 200);
}

TEST_CASE("gold loading from a corpus file") {
  TempDir dir;
  CorpusOptions o;
  o.n = 3;
  const auto corpus = generate_corpus(o);
  const auto path = dir.path() / "gold.ndjson";
  {
    std::ofstream out(path);
    for (const auto& r : corpus) out << to_json(r).dump() << '\n';
  }
  const auto gold = load_gold(path);
  REQUIRE(gold.size() == 3);
  CHECK(gold.at(corpus[1].report_id) == corpus[1].gold);
  CHECK_THROWS_AS(load_gold(dir.path() / "missing.ndjson"), ConfigError);
}
