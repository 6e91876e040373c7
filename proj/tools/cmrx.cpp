// cmrx: command-line front end for the extraction pipeline.
//
//   cmrx synth --n 100 --seed 7 > corpus.ndjson
//   cmrx extract --mock --corpus corpus.ndjson > samples.ndjson
//   cmrx score samples.ndjson > scored.ndjson
//   cmrx --data-dir store triage scored.ndjson
//   cmrx eval --gold corpus.ndjson --pred scored.ndjson
//
// Exit codes: 0 ok, 1 data error, 2 usage or configuration error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cmrx/batch.hpp"
#include "cmrx/eval.hpp"
#include "cmrx/pipeline.hpp"
#include "cmrx/scrub.hpp"
#include "cmrx/service.hpp"
#include "cmrx/synth.hpp"
#include "cmrx/triage.hpp"

using namespace cmrx;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_all(const std::string& path) {
  if (path.empty() || path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<ojson> read_ndjson(const std::string& path) {
  std::istringstream in(read_all(path));
  std::vector<ojson> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto j = ojson::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object())
      throw DataError((path.empty() ? std::string("<stdin>") : path) + ":" + std::to_string(n) + ": not a JSON object");
    out.push_back(std::move(j));
  }
  return out;
}

class Output {
 public:
  explicit Output(const std::string& path) {
    if (!path.empty() && path != "-") {
      file_.open(path, std::ios::binary | std::ios::trunc);
      if (!file_) throw DataError("cannot write '" + path + "'");
    }
  }
  std::ostream& os() { return file_.is_open() ? static_cast<std::ostream&>(file_) : std::cout; }

 private:
  std::ofstream file_;
};

std::vector<TemplateStyle> parse_styles(const std::string& s) {
  std::vector<TemplateStyle> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto st = style_from_name(tok);
    if (!st) throw ConfigError("unknown style '" + tok + "' (tabular, narrative)");
    out.push_back(*st);
  }
  if (out.empty()) throw ConfigError("--styles needs at least one style");
  return out;
}

// "omission=0.01,inexact=0.02,..."
CorruptionPlan parse_rates(const std::string& s) {
  CorruptionPlan p;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw ConfigError("bad --corrupt-rates entry '" + tok + "'");
    const auto key = tok.substr(0, eq);
    double v = 0;
    try {
      v = std::stod(tok.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("bad rate in '" + tok + "'");
    }
    if (key == "omission") p.omission = v;
    else if (key == "inexact") p.inexact = v;
    else if (key == "confusion") p.confusion = v;
    else if (key == "fabrication") p.fabrication = v;
    else if (key == "truncation") p.truncation = v;
    else throw ConfigError("unknown corruption kind '" + key + "'");
  }
  try {
    p.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return p;
}

ojson scored_json(const std::string& id, const std::string& text, const std::optional<Aggregate>& a) {
  ojson j;
  j["report_id"] = id;
  j["text"] = text;
  if (a) {
    j["record"] = record_to_json(a->record);
    j["confidence_bundle"] = bundle_to_json(a->bundle);
    ojson flagged = ojson::array();
    for (auto f : a->bundle.flagged()) flagged.push_back(std::string(key_of(f)));
    j["flagged_fields"] = flagged;
  } else {
    j["record"] = nullptr;
    j["error"] = "no sample produced a parseable record";
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cmrx: structured extraction from cardiac MR reports, with confidence triage"};
  app.require_subcommand(1);

  std::string config_path, data_dir;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--data-dir", data_dir, "triage store directory");

  // scrub
  auto* scrub = app.add_subcommand("scrub", "drop PHI lines from a report");
  std::string scrub_in, scrub_out;
  scrub->add_option("input", scrub_in, "report file (default stdin)");
  scrub->add_option("-o,--out", scrub_out);

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic corpus");
  std::size_t synth_n = 100;
  std::uint64_t synth_seed = 0;
  std::string synth_styles = "tabular,narrative", synth_rates, synth_out;
  double null_rate = 0.05;
  synth->add_option("--n", synth_n)->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed);
  synth->add_option("--styles", synth_styles, "comma list: tabular,narrative");
  synth->add_option("--corrupt-rates", synth_rates, "e.g. omission=0.02,inexact=0.02,confusion=0.01");
  synth->add_option("--null-rate", null_rate)->check(CLI::Range(0.0, 1.0));
  synth->add_option("-o,--out", synth_out);

  // extract
  auto* extract = app.add_subcommand("extract", "sample the model on reports");
  std::vector<std::string> extract_files;
  std::string extract_corpus, extract_endpoint, extract_out;
  bool use_mock = false;
  int samples = -1;
  double temperature = -1;
  double mock_jitter = 0, mock_dropout = 0;
  std::uint64_t mock_seed = 0;
  extract->add_option("files", extract_files, "report text files");
  extract->add_option("--corpus", extract_corpus, "synthetic corpus ndjson");
  extract->add_option("--endpoint", extract_endpoint, "inference endpoint base URL");
  extract->add_flag("--mock", use_mock, "offline mock model (echoes the corpus corruption if any)");
  extract->add_option("--samples", samples, "samples per report (default 3)");
  extract->add_option("--temperature", temperature, "sampling temperature (default 0.3)");
  extract->add_option("--mock-jitter", mock_jitter, "mock: per-field relative jitter rate");
  extract->add_option("--mock-dropout", mock_dropout, "mock: per-field dropout rate");
  extract->add_option("--mock-seed", mock_seed);
  extract->add_option("-o,--out", extract_out);

  // score
  auto* score = app.add_subcommand("score", "vote and score sampled records");
  std::string score_in, score_out;
  score->add_option("input", score_in, "output of extract (default stdin)");
  score->add_option("-o,--out", score_out);

  // triage
  auto* triage = app.add_subcommand("triage", "populate and work the review queue");
  std::string triage_in, decide_item, reviewer, correct_value, status_filter = "pending";
  bool accept = false, list = false, rebuild = false;
  triage->add_option("input", triage_in, "output of score to enqueue");
  triage->add_flag("--list", list, "print the queue as ndjson");
  triage->add_option("--status", status_filter, "pending|accepted|corrected|all");
  triage->add_option("--decide", decide_item, "item id to decide");
  triage->add_flag("--accept", accept);
  triage->add_option("--correct", correct_value, "corrected value (number or null)");
  triage->add_option("--reviewer", reviewer);
  triage->add_flag("--rebuild", rebuild, "replay the decision log");

  // eval
  auto* eval = app.add_subcommand("eval", "compare predictions against gold");
  std::string eval_gold, eval_pred, eval_name = "model";
  bool eval_json = false;
  eval->add_option("--gold", eval_gold, "synthetic corpus ndjson")->required();
  eval->add_option("--pred", eval_pred, "ndjson with report_id and record")->required();
  eval->add_option("--name", eval_name, "row label");
  eval->add_flag("--json", eval_json);

  // export-corpus
  auto* exp = app.add_subcommand("export-corpus", "write reviewed records as a training corpus");
  std::string exp_filter = "all", exp_out;
  exp->add_option("--filter", exp_filter, "all|clean")->check(CLI::IsMember({"all", "clean"}));
  exp->add_option("-o,--out", exp_out);

  // serve
  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  std::string serve_host, serve_gold, serve_static, serve_token;
  int serve_port = -1;
  bool serve_mock = false;
  serve->add_option("--host", serve_host);
  serve->add_option("--port", serve_port)->check(CLI::Range(0, 65535));
  serve->add_option("--gold", serve_gold, "synthetic corpus for /v1/metrics");
  serve->add_option("--static", serve_static, "static assets directory");
  serve->add_option("--token", serve_token, "require this bearer token on /v1");
  serve->add_flag("--mock", serve_mock);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    PipelineConfig cfg = config_path.empty() ? PipelineConfig{} : PipelineConfig::from_file(config_path);
    cfg.endpoint = EndpointConfig::from_env(cfg.endpoint);
    if (!data_dir.empty()) cfg.data_dir = data_dir;

    if (scrub->parsed()) {
      Output out(scrub_out);
      out.os() << scrub_phi(read_all(scrub_in));
      return 0;
    }

    if (synth->parsed()) {
      CorpusOptions opts;
      opts.n = synth_n;
      opts.seed = synth_seed;
      opts.styles = parse_styles(synth_styles);
      opts.synth.null_rate = null_rate;
      if (!synth_rates.empty()) {
        opts.plan = parse_rates(synth_rates);
        opts.plan->seed = synth_seed;
      }
      Output out(synth_out);
      for (const auto& r : generate_corpus(opts)) out.os() << to_json(r).dump() << '\n';
      return 0;
    }

    if (extract->parsed()) {
      if (!extract_endpoint.empty()) cfg.endpoint.base_url = extract_endpoint;
      if (samples > 0) cfg.params.n_samples = samples;
      if (temperature >= 0) cfg.params.temperature = temperature;
      cfg.mock = cfg.mock || use_mock;
      cfg.mock_noise.jitter_rate = mock_jitter;
      cfg.mock_noise.dropout = mock_dropout;
      cfg.mock_noise.seed = mock_seed;
      if (extract_files.empty() == extract_corpus.empty())
        throw ConfigError("extract takes either report files or --corpus");

      std::vector<std::pair<std::string, std::string>> reports;
      std::map<std::string, std::optional<CmrRecord>> echo;  // scrubbed text -> mock answer
      if (!extract_corpus.empty()) {
        for (const auto& j : read_ndjson(extract_corpus)) {
          auto r = synth_report_from_json(j);
          if (r.corruption) {
            const auto* rec = std::get_if<CmrRecord>(&r.corruption->pred);
            echo[scrub_phi(r.text)] = rec ? std::optional<CmrRecord>(*rec) : std::nullopt;
          }
          reports.emplace_back(r.report_id, r.text);
        }
      } else {
        for (const auto& f : extract_files) reports.emplace_back(fs::path(f).stem().string(), read_all(f));
      }

      std::shared_ptr<Completer> completer;
      if (cfg.mock && !echo.empty()) {
        completer = std::make_shared<MockCompleter>(
            [&echo](std::string_view text) -> std::optional<CmrRecord> {
              auto it = echo.find(std::string(text));
              if (it != echo.end()) return it->second;
              return rule_extract(text);
            },
            cfg.mock_noise);
      } else if (cfg.mock) {
        completer = std::make_shared<MockCompleter>(cfg.mock_noise);
      } else {
        completer = std::make_shared<HttpCompleter>(cfg.endpoint);
      }

      Pipeline pipeline(cfg, completer);
      Output out(extract_out);
      for (const auto& pr : pipeline.process_all(reports)) {
        auto j = sample_set_to_json(pr.samples);
        j["text"] = pr.scrubbed_text;
        out.os() << j.dump() << '\n';
      }
      return 0;
    }

    if (score->parsed()) {
      Pipeline pipeline(cfg, std::make_shared<MockCompleter>());
      std::vector<SampleSet> sets;
      std::vector<std::string> texts;
      for (const auto& j : read_ndjson(score_in)) {
        sets.push_back(sample_set_from_json(j));
        texts.push_back(j.value("text", ""));
      }
      auto scored = score_batch_parallel(sets, pipeline.ranges(), pipeline.ledger(), cfg.params);
      Output out(score_out);
      for (std::size_t i = 0; i < sets.size(); ++i)
        out.os() << scored_json(sets[i].report_id, texts[i], scored[i].result).dump() << '\n';
      return 0;
    }

    if (triage->parsed()) {
      TriageStore store(cfg.data_dir);
      if (!triage_in.empty()) {
        std::size_t n_items = 0;
        for (const auto& j : read_ndjson(triage_in)) {
          const auto id = j.at("report_id").get<std::string>();
          const auto text = j.value("text", "");
          if (!j.contains("record") || j["record"].is_null()) {
            n_items += store.enqueue_invalid(id, text).size();
            continue;
          }
          auto rec = record_from_json(j["record"]);
          if (!is_record(rec)) throw DataError(id + ": " + std::get<ParseError>(rec).message);
          n_items += store.enqueue(std::get<CmrRecord>(rec), bundle_from_json(j.at("confidence_bundle")), id, text).size();
        }
        std::fprintf(stderr, "%zu review items\n", n_items);
      }
      if (!decide_item.empty()) {
        if (accept == !correct_value.empty()) throw ConfigError("--decide needs exactly one of --accept / --correct");
        if (reviewer.empty()) throw ConfigError("--decide needs --reviewer");
        ReviewDecision d;
        d.item_id = decide_item;
        d.reviewer = reviewer;
        if (accept) {
          d.verdict = ReviewDecision::Verdict::Accept;
        } else {
          d.verdict = ReviewDecision::Verdict::Correct;
          if (correct_value == "null" || correct_value == "Null") {
            d.new_value = FieldValue::null();
          } else {
            try {
              d.new_value = FieldValue::present(std::stod(correct_value));
            } catch (const std::exception&) {
              throw DataError("--correct: not a number: '" + correct_value + "'");
            }
          }
        }
        std::cout << record_to_json(store.apply_decision(d)).dump() << '\n';
      }
      if (rebuild) store.rebuild_from_log();
      if (list) {
        std::optional<ReviewStatus> st;
        if (status_filter != "all") {
          st = status_from_name(status_filter);
          if (!st) throw ConfigError("unknown --status '" + status_filter + "'");
        }
        for (const auto& it : store.queue(st)) std::cout << to_json(it).dump() << '\n';
      }
      return 0;
    }

    if (eval->parsed()) {
      std::map<std::string, SynthReport> gold;
      for (const auto& j : read_ndjson(eval_gold)) {
        auto r = synth_report_from_json(j);
        gold.emplace(r.report_id, std::move(r));
      }
      std::vector<CmrRecord> golds;
      std::vector<ParseOutcome> preds;
      std::vector<DiagnosisCategory> gc, pc;
      std::vector<ErrorLabel> labels;
      std::vector<double> scores;
      for (const auto& j : read_ndjson(eval_pred)) {
        const auto id = j.at("report_id").get<std::string>();
        auto g = gold.find(id);
        if (g == gold.end()) throw DataError("prediction for unknown report '" + id + "'");
        ParseOutcome pred = ParseError{ParseError::Kind::Invalid, "no record"};
        if (j.contains("record") && !j["record"].is_null()) pred = parse_record(j["record"].dump());
        golds.push_back(g->second.gold);
        gc.push_back(g->second.gold.category);
        pc.push_back(is_record(pred) ? std::get<CmrRecord>(pred).category : DiagnosisCategory::Unspecified);
        if (j.contains("confidence_bundle") && !j["confidence_bundle"].is_null()) {
          auto b = bundle_from_json(j["confidence_bundle"]);
          auto l = classify_record(g->second.gold, pred);
          for (std::size_t i = 0; i < kFieldCount; ++i) {
            labels.push_back(l[i]);
            scores.push_back(b.fields[i].final);
          }
        }
        preds.push_back(std::move(pred));
      }
      if (golds.empty()) throw DataError("no predictions to evaluate");
      const auto m = extraction_metrics(golds, preds);
      const auto c = classification_metrics(gc, pc);
      const auto d = confidence_discrimination(labels, scores, cfg.params.review_threshold);
      if (eval_json) {
        ojson j;
        j["extraction"] = to_json(m);
        j["classification"] = to_json(c);
        j["discrimination"] = to_json(d);
        std::cout << j.dump(2) << '\n';
      } else {
        std::cout << format_metrics_table(eval_name, m) << '\n' << format_classification_table(eval_name, c);
        if (d.n_below + d.n_above > 0) {
          auto rate = [](const std::optional<double>& r) { return r ? 100.0 * *r : 0.0; };
          std::printf("\nerror rate, confidence < %.2f: %.2f%% of %zu fields\n", cfg.params.review_threshold,
                      rate(d.err_below), d.n_below);
          std::printf("error rate, confidence >= %.2f: %.2f%% of %zu fields\n", cfg.params.review_threshold,
                      rate(d.err_above), d.n_above);
        }
      }
      return 0;
    }

    if (exp->parsed()) {
      TriageStore store(cfg.data_dir);
      Output out(exp_out);
      out.os() << store.export_corpus(exp_filter == "clean" ? CorpusFilter::CleanOnly : CorpusFilter::AllReviewed);
      return 0;
    }

    if (serve->parsed()) {
      if (!serve_host.empty()) cfg.listen_host = serve_host;
      if (serve_port >= 0) cfg.listen_port = serve_port;
      if (!serve_gold.empty()) cfg.gold_path = serve_gold;
      if (!serve_static.empty()) cfg.static_dir = serve_static;
      if (!serve_token.empty()) cfg.bearer_token = serve_token;
      cfg.mock = cfg.mock || serve_mock;
      Service svc(cfg);
      std::fprintf(stderr, "listening on %s:%d\n", cfg.listen_host.c_str(), cfg.listen_port);
      if (!svc.listen(cfg.listen_host, cfg.listen_port)) {
        std::fprintf(stderr, "cmrx: cannot listen on %s:%d\n", cfg.listen_host.c_str(), cfg.listen_port);
        return 2;
      }
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "cmrx: config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "cmrx: %s\n", e.what());
    return 1;
  }
  return 0;
}
