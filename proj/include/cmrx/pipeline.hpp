#pragma once

// Wiring shared by the CLI and the HTTP service: configuration, the
// scrub -> sample -> aggregate path, and a bounded worker pool over reports.

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmrx/confidence.hpp"
#include "cmrx/gateway.hpp"
#include "cmrx/ledger.hpp"

namespace cmrx {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PipelineConfig {
  EndpointConfig endpoint;
  ScoreParams params;
  std::filesystem::path data_dir = "cmrx-data";
  std::optional<std::filesystem::path> ranges_path;  // default: built-in table
  std::optional<std::filesystem::path> ledger_path;  // default: built-in ledger
  int workers = 4;
  std::string listen_host = "127.0.0.1";
  int listen_port = 8080;
  bool mock = false;
  NoiseProfile mock_noise;
  std::optional<std::string> bearer_token;
  std::optional<std::filesystem::path> static_dir;
  std::optional<std::filesystem::path> gold_path;  // synth corpus ndjson (eval mode)

  /// Throws ConfigError: missing paths, workers < 1, bad parameters.
  void validate() const;

  /// Reads a JSON config file; keys mirror the field names, with nested
  /// "endpoint", "params" and "mock_noise" objects.
  static PipelineConfig from_file(const std::filesystem::path& path);
  static PipelineConfig from_json(const nlohmann::ordered_json& j, PipelineConfig base);
  static PipelineConfig from_json(const nlohmann::ordered_json& j);
};

struct ProcessedReport {
  std::string report_id;
  std::string scrubbed_text;
  SampleSet samples;
  std::optional<Aggregate> result;  // nullopt: all samples unparseable
};

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig cfg);
  Pipeline(PipelineConfig cfg, std::shared_ptr<Completer> completer);

  const PipelineConfig& config() const { return cfg_; }
  const ReferenceTable& ranges() const { return ranges_; }
  const std::vector<Formula>& ledger() const { return ledger_; }
  Completer& completer() { return *completer_; }

  /// Scrubs, samples and scores one report. TransportError propagates.
  ProcessedReport process(const std::string& report_id, const std::string& raw_text);
  SampleSet sample(const std::string& report_id, const std::string& scrubbed_text);
  std::optional<Aggregate> score(const SampleSet& samples) const;

  /// Runs process() over many reports with `workers` threads; output order
  /// follows input order.
  std::vector<ProcessedReport> process_all(const std::vector<std::pair<std::string, std::string>>& reports);

 private:
  PipelineConfig cfg_;
  ReferenceTable ranges_;
  std::vector<Formula> ledger_;
  std::shared_ptr<Completer> completer_;
};

/// Stable id for a report text when the caller supplies none.
std::string default_report_id(const std::string& text);

nlohmann::ordered_json sample_set_to_json(const SampleSet& s);
SampleSet sample_set_from_json(const nlohmann::ordered_json& j);

}  // namespace cmrx
