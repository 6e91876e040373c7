#pragma once

// Prompt assembly and completion transport. Talks to any chat-completions
// style endpoint; MockCompleter runs the same path fully offline.

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cmrx/fields.hpp"
#include "cmrx/gateway_types.hpp"
#include "cmrx/record.hpp"

namespace cmrx {

struct EndpointConfig {
  std::string base_url = "http://127.0.0.1:8000";
  std::string api_path = "/v1/chat/completions";
  std::string model_name = "cmr-extractor";
  double timeout_s = 60;
  int max_retries = 2;
  bool structured_mode = false;
  // One prompt per field instead of one per report.
  bool per_field_prompts = false;
  // Issue the samples of one report concurrently.
  bool parallel_samples = true;
  int backoff_base_ms = 500;
  double backoff_factor = 2.0;

  void validate() const;

  /// Applies ENDPOINT_URL, MODEL_NAME, REQUEST_TIMEOUT_S, MAX_RETRIES and
  /// STRUCTURED_MODE from the environment on top of `base`.
  static EndpointConfig from_env(EndpointConfig base);
};

/// Raised when the endpoint cannot be reached or answers with a protocol
/// error after all retries. Unparseable model text is not a transport error.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr std::string_view kReportOpen = "<report>";
inline constexpr std::string_view kReportClose = "</report>";

std::string build_prompt(std::string_view report_text, std::span<const FieldSpec> specs);
std::string build_prompt(std::string_view report_text);

/// Single-field prompt used when per_field_prompts is set.
std::string build_field_prompt(std::string_view report_text, const FieldSpec& spec);
std::string build_category_prompt(std::string_view report_text);

/// Recovers the verbatim report text from a prompt built above.
std::optional<std::string> report_from_prompt(std::string_view prompt);

/// JSON schema of the record wire format (for schema-constrained sampling).
std::string record_json_schema();

class Completer {
 public:
  virtual ~Completer() = default;
  /// `attempt` is the 0-based sample index; deterministic completers use it
  /// to derive their per-sample randomness. Must be safe to call concurrently.
  virtual std::string complete(const std::string& prompt, double temperature, int attempt) = 0;
};

class HttpCompleter : public Completer {
 public:
  explicit HttpCompleter(EndpointConfig cfg);
  std::string complete(const std::string& prompt, double temperature, int attempt) override;

  /// Request body sent for a prompt (exposed for wire-format tests).
  std::string request_body(const std::string& prompt, double temperature) const;

 private:
  EndpointConfig cfg_;
};

struct NoiseProfile {
  double dropout = 0;          // per present field: emit null
  double jitter_rate = 0;      // per present field: relative perturbation
  double jitter_max = 0.10;    // max relative perturbation magnitude
  double swap_rate = 0;        // per field: swap value with another field
  double truncation_rate = 0;  // whole output cut mid-document
  std::vector<FieldId> force_dropout;
  std::uint64_t seed = 0;

  bool is_none() const {
    return dropout == 0 && jitter_rate == 0 && swap_rate == 0 && truncation_rate == 0 && force_dropout.empty();
  }
};

/// Offline stand-in for a model: the serialized gold record, perturbed per
/// the noise profile. Deterministic in (report_text, gold, noise).
std::string mock_extract(std::string_view report_text, const CmrRecord& gold, const NoiseProfile& noise);

class MockCompleter : public Completer {
 public:
  /// Maps report text to the record the mock should echo; nullopt makes the
  /// mock answer with unparseable text.
  using Source = std::function<std::optional<CmrRecord>(std::string_view report_text)>;

  /// Default source is the rule-based re-extractor for synthetic reports.
  explicit MockCompleter(NoiseProfile noise = {});
  MockCompleter(Source source, NoiseProfile noise);

  std::string complete(const std::string& prompt, double temperature, int attempt) override;

 private:
  Source source_;
  NoiseProfile noise_;
};

/// Runs n completions of the report prompt at the given temperature and
/// parses each. Parse failures are kept per attempt; transport failures throw.
SampleSet extract_sampled(std::string_view report_text, Completer& completer, const EndpointConfig& cfg,
                          int n = 3, double temperature = 0.3, std::string report_id = {});

}  // namespace cmrx
