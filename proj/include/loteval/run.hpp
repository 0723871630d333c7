#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "loteval/backend.hpp"
#include "loteval/corpus.hpp"
#include "loteval/parse.hpp"
#include "loteval/prompts.hpp"
#include "loteval/score.hpp"

namespace loteval {

struct BackendConfig {
  enum class Kind { live, replay };
  Kind kind = Kind::live;
  std::string model = "text-completion";
  std::string base_url = "http://127.0.0.1:8080";
  std::string path = "/v1/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  double temperature = 0.0;
  int max_tokens = 512;
  std::vector<std::string> stop;
  std::string fixture_dir;  // replay source
  int timeout_s = 60;
  int max_retries = 4;
  int initial_backoff_ms = 500;
};

struct RunConfig {
  std::string corpus_path;
  std::string lexicon_path;
  std::string template_path;     // empty: built-in defaults
  std::string parse_rules_path;  // empty: built-in defaults
  std::vector<Strategy> strategies{kAllStrategies.begin(), kAllStrategies.end()};
  std::uint64_t seed = 2018;
  int per_charge = 100;
  BackendConfig backend;
  std::string cache_dir;  // empty: no cache
  int parallelism = 4;
  std::string output_dir = ".";
  MatchMode match = MatchMode::exact_set;

  void validate() const;  // throws std::invalid_argument
};

// Config file (JSON) merged over defaults; unknown keys are an error.
RunConfig run_config_from_file(const std::string& path);

// Render -> complete -> parse for every (strategy, case) pair, with up to
// `parallelism` completions in flight. Results are joined by (strategy order,
// case id) regardless of completion timing. When checkpoint_path is set,
// each finished prediction is appended there and a rerun resumes past pairs
// already recorded for the same run key.
std::vector<Prediction> run_predictions(const std::vector<CaseRecord>& sample,
                                        const std::vector<Strategy>& strategies,
                                        const TemplateSet& templates, CompletionBackend& backend,
                                        const BackendConfig& backend_config,
                                        const ChargeLexicon& lexicon, const ParseRules& rules,
                                        int parallelism, UsageLedger& ledger,
                                        const std::string& checkpoint_path = {},
                                        const std::string& checkpoint_key = {});

// Prediction file IO (line-delimited JSON, ordered by strategy then case id).
std::string prediction_to_json_line(const Prediction& p);
Prediction prediction_from_json_line(const std::string& line, int line_no);
void write_predictions(const std::string& path, const std::vector<Prediction>& predictions);
std::vector<Prediction> read_predictions(const std::string& path);

// Reproducibility record written next to every sample/run output.
struct RunManifest {
  nlohmann::ordered_json config;
  std::string template_version;
  std::string corpus_digest;
  std::vector<std::string> sampled_case_ids;
  std::string started_at;
  std::string finished_at;
  UsageTotals usage;
};

nlohmann::ordered_json manifest_to_json(const RunManifest& manifest);
void write_manifest(const std::string& path, const RunManifest& manifest);

nlohmann::ordered_json config_to_json(const RunConfig& config);
RunConfig config_from_json(const nlohmann::json& doc);

std::string iso8601_utc_now();

// Stable identity of a run: corpus digest + seed + strategies + templates +
// model + decoding parameters. Guards checkpoint reuse.
std::string run_key(const RunConfig& config, const std::string& corpus_digest,
                    const std::string& template_version);

// Verdicts + report for already-parsed predictions against a sample.
// Throws AlignmentError when the two do not cover the same (strategy, case)
// pairs exactly.
EvalReport score_predictions(const std::vector<Prediction>& predictions,
                             const std::vector<CaseRecord>& sample,
                             const std::vector<Strategy>& strategies,
                             const ChargeLexicon& lexicon, const std::string& model,
                             const std::string& template_version,
                             MatchMode match = MatchMode::exact_set);

}  // namespace loteval
