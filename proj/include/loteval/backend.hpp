#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace loteval {

struct CompletionRequest {
  std::string model;
  std::string prompt;
  double temperature = 0.0;
  int max_tokens = 512;
  std::vector<std::string> stop;
  // Participates in the request digest so cached/replayed generations are
  // invalidated whenever the prompt templates change.
  std::string template_version;
};

// Fixed-field-order canonical byte form of a request; its SHA-256 is the
// cache/fixture key.
std::string canonical_request(const CompletionRequest& request);
std::string request_digest(const CompletionRequest& request);

enum class ResponseSource { live, cache, replay };
std::string_view to_string(ResponseSource s) noexcept;
std::optional<ResponseSource> response_source_from_string(std::string_view name) noexcept;

struct CompletionResponse {
  std::string text;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  int latency_ms = 0;
  bool truncated = false;  // generation stopped at the max_tokens limit
  ResponseSource source = ResponseSource::live;
};

struct BackendUnavailable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AuthMissing : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct FixtureMiss : std::runtime_error {
  explicit FixtureMiss(const std::string& digest)
      : std::runtime_error("no fixture for request digest " + digest), digest(digest) {}
  std::string digest;
};

struct UsageTotals {
  long long prompt_tokens = 0;
  long long completion_tokens = 0;
  long long live_calls = 0;
  long long cache_hits = 0;
  long long replay_hits = 0;
  long long retries = 0;
  long long errors = 0;
  long long cache_corrupt = 0;
};

// Thread-safe monotone usage counters, per model and overall.
class UsageLedger {
 public:
  void record(const std::string& model, const CompletionResponse& response);
  void record_retry();
  void record_error();
  void record_cache_corrupt();

  UsageTotals totals() const;
  std::map<std::string, UsageTotals> per_model() const;

 private:
  mutable std::mutex mu_;
  UsageTotals totals_;
  std::map<std::string, UsageTotals> per_model_;
};

// Abstract completion source. Implementations must tolerate concurrent
// complete() calls up to the orchestrator's parallelism.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual CompletionResponse complete(const CompletionRequest& request) = 0;
};

// One file per request digest; each file holds the canonical request and the
// response verbatim. The cache and the replay fixture store share this layout,
// so any populated cache directory can be replayed directly.
namespace fixture_store {

std::string entry_path(const std::string& dir, const std::string& digest);
void write_entry(const std::string& dir, const CompletionRequest& request,
                 const CompletionResponse& response);

struct ReadResult {
  std::optional<CompletionResponse> response;
  bool corrupt = false;
};
ReadResult read_entry(const std::string& dir, const CompletionRequest& request);

// record_fixtures: persist every (request, response) pair of a finished run.
void record(const std::string& dir,
            const std::vector<std::pair<CompletionRequest, CompletionResponse>>& pairs);

}  // namespace fixture_store

// Answers only from a fixture store; unknown digests are a FixtureMiss.
class ReplayBackend : public CompletionBackend {
 public:
  explicit ReplayBackend(std::string dir) : dir_(std::move(dir)) {}
  CompletionResponse complete(const CompletionRequest& request) override;

 private:
  std::string dir_;
};

// Content-addressed read-through cache in front of another backend. A corrupt
// entry is counted, bypassed, and rewritten from the inner backend.
class CachedBackend : public CompletionBackend {
 public:
  CachedBackend(std::string dir, CompletionBackend& inner, UsageLedger* ledger = nullptr)
      : dir_(std::move(dir)), inner_(inner), ledger_(ledger) {}
  CompletionResponse complete(const CompletionRequest& request) override;

 private:
  std::string dir_;
  CompletionBackend& inner_;
  UsageLedger* ledger_;
};

struct HttpBackendConfig {
  std::string base_url = "http://127.0.0.1:8080";
  std::string path = "/v1/completions";
  std::string api_key_env = "OPENAI_API_KEY";
  int timeout_s = 60;
  int max_retries = 4;          // transient failures (429/5xx/timeouts)
  int initial_backoff_ms = 500; // doubled per retry, no jitter
};

// Live HTTP client speaking the completions wire shape
// {"model","prompt","temperature","max_tokens","stop"} ->
// {"choices":[{"text","finish_reason"}],"usage":{...}}.
std::unique_ptr<CompletionBackend> make_http_backend(HttpBackendConfig config,
                                                     UsageLedger* ledger = nullptr);

}  // namespace loteval
