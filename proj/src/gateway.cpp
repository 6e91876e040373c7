#include "cmrx/gateway.hpp"

#include <chrono>
#include <cstdlib>
#include <future>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cmrx/rng.hpp"
#include "cmrx/synth.hpp"

namespace cmrx {

using ojson = nlohmann::ordered_json;

void EndpointConfig::validate() const {
  if (!(timeout_s > 0)) throw std::invalid_argument("timeout must be > 0");
  if (max_retries < 0) throw std::invalid_argument("max_retries must be >= 0");
  if (backoff_base_ms < 0 || backoff_factor < 1) throw std::invalid_argument("invalid backoff settings");
  if (base_url.empty()) throw std::invalid_argument("endpoint base_url is empty");
}

EndpointConfig EndpointConfig::from_env(EndpointConfig cfg) {
  auto env = [](const char* name) -> std::optional<std::string> {
    const char* v = std::getenv(name);
    if (!v || !*v) return std::nullopt;
    return std::string(v);
  };
  if (auto v = env("ENDPOINT_URL")) cfg.base_url = *v;
  if (auto v = env("MODEL_NAME")) cfg.model_name = *v;
  try {
    if (auto v = env("REQUEST_TIMEOUT_S")) cfg.timeout_s = std::stod(*v);
    if (auto v = env("MAX_RETRIES")) cfg.max_retries = std::stoi(*v);
  } catch (const std::logic_error&) {
    throw std::invalid_argument("REQUEST_TIMEOUT_S / MAX_RETRIES must be numeric");
  }
  if (auto v = env("STRUCTURED_MODE")) cfg.structured_mode = (*v == "1" || *v == "true" || *v == "TRUE" || *v == "yes");
  return cfg;
}

// ---------------------------------------------------------------------------
// Prompts

std::string build_prompt(std::string_view report_text, std::span<const FieldSpec> specs) {
  std::ostringstream p;
  p << "You are extracting structured measurements from a cardiac magnetic resonance (CMR) report.\n"
       "Read the whole report and return one JSON object with exactly the keys listed below, in this order.\n"
       "Each value must be a number in the stated unit, or null if the report does not state it.\n"
       "Do not compute values that the report does not state.\n\n"
       "Fields:\n";
  for (const auto& s : specs) p << "- " << s.key << " (" << s.unit << "): " << s.description << "\n";
  p << "- CATEGORY: diagnostic category, one of CAD, HCM, DCM, Ebstein, PAH, or Unspecified\n\n";
  p << kReportOpen << "\n" << report_text << "\n" << kReportClose << "\n\n";
  p << "Answer with the JSON object only, keys in the order above, ending with \"CATEGORY\".\n";
  return p.str();
}

std::string build_prompt(std::string_view report_text) { return build_prompt(report_text, field_specs()); }

std::string build_field_prompt(std::string_view report_text, const FieldSpec& spec) {
  std::ostringstream p;
  p << "You are extracting one measurement from a cardiac magnetic resonance (CMR) report.\n"
    << "Field: " << spec.key << "\nUnit: " << spec.unit << "\nDescription: " << spec.description << "\n"
    << "Answer with the number only, in the stated unit, or null if the report does not state it.\n\n"
    << kReportOpen << "\n" << report_text << "\n" << kReportClose << "\n";
  return p.str();
}

std::string build_category_prompt(std::string_view report_text) {
  std::ostringstream p;
  p << "You are classifying a cardiac magnetic resonance (CMR) report.\n"
    << "Field: CATEGORY\n"
    << "Answer with one of CAD, HCM, DCM, Ebstein, PAH, or Unspecified.\n\n"
    << kReportOpen << "\n" << report_text << "\n" << kReportClose << "\n";
  return p.str();
}

std::optional<std::string> report_from_prompt(std::string_view prompt) {
  const auto open = prompt.find(kReportOpen);
  const auto close = prompt.rfind(kReportClose);
  if (open == std::string_view::npos || close == std::string_view::npos || close < open) return std::nullopt;
  const auto begin = open + kReportOpen.size() + 1;  // skip newline
  if (close < begin + 1) return std::string();
  return std::string(prompt.substr(begin, close - 1 - begin));
}

std::string record_json_schema() {
  ojson props = ojson::object();
  ojson required = ojson::array();
  for (const auto& s : field_specs()) {
    props[std::string(s.key)] = {{"type", {"number", "null"}}, {"minimum", 0}, {"description", std::string(s.description)}};
    required.push_back(std::string(s.key));
  }
  props["CATEGORY"] = {{"type", "string"}, {"enum", {"CAD", "HCM", "DCM", "Ebstein", "PAH", "Unspecified"}}};
  required.push_back("CATEGORY");
  ojson schema = {{"type", "object"}, {"properties", props}, {"required", required}, {"additionalProperties", false}};
  return schema.dump();
}

// ---------------------------------------------------------------------------
// HTTP transport

HttpCompleter::HttpCompleter(EndpointConfig cfg) : cfg_(std::move(cfg)) { cfg_.validate(); }

std::string HttpCompleter::request_body(const std::string& prompt, double temperature) const {
  ojson body;
  body["model"] = cfg_.model_name;
  body["messages"] = ojson::array({ojson{{"role", "user"}, {"content", prompt}}});
  body["temperature"] = temperature;
  if (cfg_.structured_mode) {
    body["response_format"] = {
        {"type", "json_schema"},
        {"json_schema", {{"name", "cmr_record"}, {"strict", true}, {"schema", ojson::parse(record_json_schema())}}}};
  }
  return body.dump();
}

std::string HttpCompleter::complete(const std::string& prompt, double temperature, int /*attempt*/) {
  httplib::Client cli(cfg_.base_url);
  const auto secs = static_cast<time_t>(cfg_.timeout_s);
  const auto usecs = static_cast<time_t>((cfg_.timeout_s - static_cast<double>(secs)) * 1e6);
  cli.set_connection_timeout(secs, usecs);
  cli.set_read_timeout(secs, usecs);
  cli.set_write_timeout(secs, usecs);
  const auto body = request_body(prompt, temperature);

  std::string last_error;
  double delay_ms = cfg_.backoff_base_ms;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<long long>(delay_ms)));
      delay_ms *= cfg_.backoff_factor;
    }
    auto res = cli.Post(cfg_.api_path, body, "application/json");
    if (!res) {
      last_error = "request failed: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 429 || res->status >= 500) {
      last_error = "endpoint returned HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw TransportError("endpoint returned HTTP " + std::to_string(res->status));
    auto j = ojson::parse(res->body, nullptr, false);
    if (j.is_discarded()) throw TransportError("endpoint response is not JSON");
    try {
      return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
      throw TransportError("endpoint response lacks choices[0].message.content");
    }
  }
  throw TransportError(last_error + " (after " + std::to_string(cfg_.max_retries + 1) + " attempts)");
}

// ---------------------------------------------------------------------------
// Offline mock

std::string mock_extract(std::string_view report_text, const CmrRecord& gold, const NoiseProfile& noise) {
  if (noise.is_none()) return serialize_record(gold);
  Rng rng(mix_seed(noise.seed, hash_text(report_text)));

  CmrRecord out = gold;
  for (auto f : noise.force_dropout) out[f] = FieldValue::null();
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    auto& v = out.values[i];
    if (v.is_null()) continue;
    if (rng.chance(noise.dropout)) {
      v = FieldValue::null();
    } else if (rng.chance(noise.jitter_rate)) {
      const double mag = rng.uniform(0.01, noise.jitter_max);
      v = FieldValue::present(v.value() * (rng.chance(0.5) ? 1 + mag : 1 - mag));
    }
  }
  for (std::size_t i = 0; i < kFieldCount; ++i) {
    if (rng.chance(noise.swap_rate)) {
      const auto j = static_cast<std::size_t>(rng.below(kFieldCount));
      std::swap(out.values[i], out.values[j]);
    }
  }
  auto text = serialize_record(out);
  if (rng.chance(noise.truncation_rate)) text.resize(text.size() / 2);
  return text;
}

MockCompleter::MockCompleter(NoiseProfile noise)
    : MockCompleter([](std::string_view text) -> std::optional<CmrRecord> { return rule_extract(text); },
                    std::move(noise)) {}

MockCompleter::MockCompleter(Source source, NoiseProfile noise) : source_(std::move(source)), noise_(std::move(noise)) {}

std::string MockCompleter::complete(const std::string& prompt, double /*temperature*/, int attempt) {
  auto report = report_from_prompt(prompt);
  if (!report) return "I could not find a report in the request.";
  auto gold = source_(*report);
  if (!gold) return "{\"error\": \"no extraction available\"";

  auto noise = noise_;
  noise.seed = mix_seed(noise_.seed, static_cast<std::uint64_t>(attempt));
  auto text = mock_extract(*report, *gold, noise);

  // Per-field prompt: answer with that one value.
  const auto marker = prompt.find("\nField: ");
  if (marker == std::string::npos) return text;
  const auto key_begin = marker + 8;
  const auto key = prompt.substr(key_begin, prompt.find('\n', key_begin) - key_begin);
  auto j = ojson::parse(text, nullptr, false);
  if (j.is_discarded() || !j.contains(key)) return text;
  return j[key].is_string() ? j[key].get<std::string>() : j[key].dump();
}

// ---------------------------------------------------------------------------
// Sampling

namespace {

std::string strip_code_fence(const std::string& s) {
  auto open = s.find("```");
  if (open == std::string::npos) return s;
  auto body = s.find('\n', open);
  auto close = s.rfind("```");
  if (body == std::string::npos || close <= body) return s;
  return s.substr(body + 1, close - body - 1);
}

ParseOutcome one_sample(std::string_view report_text, Completer& completer, const EndpointConfig& cfg,
                        double temperature, int attempt) {
  if (!cfg.per_field_prompts) {
    return parse_record(strip_code_fence(completer.complete(build_prompt(report_text), temperature, attempt)));
  }
  // Assemble the record from one answer per field.
  ojson doc = ojson::object();
  for (const auto& s : field_specs()) {
    const auto answer = completer.complete(build_field_prompt(report_text, s), temperature, attempt);
    try {
      const auto v = normalize_value(s.id, answer);
      doc[std::string(s.key)] = v.is_null() ? ojson(nullptr) : ojson(v.value());
    } catch (const NormalizeError& e) {
      return ParseError{ParseError::Kind::SchemaViolation, std::string(s.key) + ": " + e.what()};
    }
  }
  auto cat = completer.complete(build_category_prompt(report_text), temperature, attempt);
  doc["CATEGORY"] = category_from_name(cat) ? cat : std::string("Unspecified");
  return parse_record(doc.dump());
}

}  // namespace

SampleSet extract_sampled(std::string_view report_text, Completer& completer, const EndpointConfig& cfg, int n,
                          double temperature, std::string report_id) {
  if (n < 1) throw std::invalid_argument("need at least one sample");
  SampleSet set;
  set.report_id = std::move(report_id);
  set.temperature = temperature;
  set.attempts.reserve(static_cast<std::size_t>(n));

  if (cfg.parallel_samples && n > 1) {
    std::vector<std::future<ParseOutcome>> futures;
    for (int i = 0; i < n; ++i)
      futures.push_back(std::async(std::launch::async, [&, i] {
        return one_sample(report_text, completer, cfg, temperature, i);
      }));
    // get() rethrows TransportError from any attempt.
    for (auto& f : futures) set.attempts.push_back(f.get());
  } else {
    for (int i = 0; i < n; ++i) set.attempts.push_back(one_sample(report_text, completer, cfg, temperature, i));
  }
  return set;
}

}  // namespace cmrx
