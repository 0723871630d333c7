#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <thread>

#include <json.hpp>

#include "loteval/backend.hpp"

namespace loteval {

namespace {

bool is_transient_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

class HttpBackend : public CompletionBackend {
 public:
  HttpBackend(HttpBackendConfig config, UsageLedger* ledger)
      : config_(std::move(config)), ledger_(ledger) {
    if (!config_.api_key_env.empty()) {
      if (const char* key = std::getenv(config_.api_key_env.c_str())) api_key_ = key;
    }
  }

  CompletionResponse complete(const CompletionRequest& request) override {
    nlohmann::ordered_json body;
    body["model"] = request.model;
    body["prompt"] = request.prompt;
    body["temperature"] = request.temperature;
    body["max_tokens"] = request.max_tokens;
    if (!request.stop.empty()) body["stop"] = request.stop;
    const std::string payload = body.dump();

    int backoff_ms = config_.initial_backoff_ms;
    std::string last_error;
    for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
      if (attempt > 0) {
        if (ledger_) ledger_->record_retry();
        std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
        backoff_ms *= 2;
      }
      const auto started = std::chrono::steady_clock::now();
      auto result = post(payload);
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - started)
                               .count();
      if (!result) {
        last_error = "transport: " + httplib::to_string(result.error());
        continue;
      }
      if (result->status == 401 || result->status == 403) {
        if (ledger_) ledger_->record_error();
        throw AuthMissing("backend rejected credentials (HTTP " +
                          std::to_string(result->status) + "); set $" + config_.api_key_env);
      }
      if (is_transient_status(result->status)) {
        last_error = "HTTP " + std::to_string(result->status);
        continue;
      }
      if (result->status != 200) {
        if (ledger_) ledger_->record_error();
        throw BackendUnavailable("HTTP " + std::to_string(result->status) + ": " + result->body);
      }
      return parse_response(result->body, static_cast<int>(elapsed));
    }
    if (ledger_) ledger_->record_error();
    throw BackendUnavailable("gave up after " + std::to_string(config_.max_retries) +
                             " retries; last error: " + last_error);
  }

 private:
  httplib::Result post(const std::string& payload) {
    // One client per call: cheap next to a completion round-trip and avoids
    // sharing connection state across worker threads.
    httplib::Client client(config_.base_url);
    client.set_connection_timeout(config_.timeout_s, 0);
    client.set_read_timeout(config_.timeout_s, 0);
    client.set_write_timeout(config_.timeout_s, 0);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    return client.Post(config_.path, headers, payload, "application/json");
  }

  CompletionResponse parse_response(const std::string& body, int latency_ms) {
    nlohmann::json doc = nlohmann::json::parse(body, nullptr, false);
    if (doc.is_discarded() || !doc.contains("choices") || !doc["choices"].is_array() ||
        doc["choices"].empty()) {
      if (ledger_) ledger_->record_error();
      throw BackendUnavailable("malformed completion response: " + body.substr(0, 200));
    }
    const auto& choice = doc["choices"][0];
    CompletionResponse response;
    response.text = choice.value("text", std::string());
    response.truncated = choice.value("finish_reason", std::string()) == "length";
    if (doc.contains("usage")) {
      response.prompt_tokens = doc["usage"].value("prompt_tokens", 0);
      response.completion_tokens = doc["usage"].value("completion_tokens", 0);
    }
    response.latency_ms = latency_ms;
    response.source = ResponseSource::live;
    return response;
  }

  HttpBackendConfig config_;
  UsageLedger* ledger_;
  std::string api_key_;
};

}  // namespace

std::unique_ptr<CompletionBackend> make_http_backend(HttpBackendConfig config,
                                                     UsageLedger* ledger) {
  return std::make_unique<HttpBackend>(std::move(config), ledger);
}

}  // namespace loteval
