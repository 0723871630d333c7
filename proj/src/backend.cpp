#include "loteval/backend.hpp"

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "loteval/digest.hpp"

namespace fs = std::filesystem;

namespace loteval {

std::string canonical_request(const CompletionRequest& request) {
  CanonicalEncoder enc;
  enc.field("model", std::string_view(request.model))
      .field("prompt", std::string_view(request.prompt))
      .field("temperature", request.temperature)
      .field("max_tokens", static_cast<long long>(request.max_tokens))
      .field_list("stop", request.stop)
      .field("template_version", std::string_view(request.template_version));
  return enc.bytes();
}

std::string request_digest(const CompletionRequest& request) {
  return sha256_hex(canonical_request(request));
}

std::string_view to_string(ResponseSource s) noexcept {
  switch (s) {
    case ResponseSource::live:
      return "live";
    case ResponseSource::cache:
      return "cache";
    case ResponseSource::replay:
      return "replay";
  }
  return "live";
}

std::optional<ResponseSource> response_source_from_string(std::string_view name) noexcept {
  if (name == "live") return ResponseSource::live;
  if (name == "cache") return ResponseSource::cache;
  if (name == "replay") return ResponseSource::replay;
  return std::nullopt;
}

void UsageLedger::record(const std::string& model, const CompletionResponse& response) {
  std::lock_guard lock(mu_);
  for (UsageTotals* t : {&totals_, &per_model_[model]}) {
    t->prompt_tokens += response.prompt_tokens;
    t->completion_tokens += response.completion_tokens;
    switch (response.source) {
      case ResponseSource::live:
        t->live_calls += 1;
        break;
      case ResponseSource::cache:
        t->cache_hits += 1;
        break;
      case ResponseSource::replay:
        t->replay_hits += 1;
        break;
    }
  }
}

void UsageLedger::record_retry() {
  std::lock_guard lock(mu_);
  totals_.retries += 1;
}

void UsageLedger::record_error() {
  std::lock_guard lock(mu_);
  totals_.errors += 1;
}

void UsageLedger::record_cache_corrupt() {
  std::lock_guard lock(mu_);
  totals_.cache_corrupt += 1;
}

UsageTotals UsageLedger::totals() const {
  std::lock_guard lock(mu_);
  return totals_;
}

std::map<std::string, UsageTotals> UsageLedger::per_model() const {
  std::lock_guard lock(mu_);
  return per_model_;
}

namespace fixture_store {

std::string entry_path(const std::string& dir, const std::string& digest) {
  return (fs::path(dir) / (digest + ".json")).string();
}

namespace {

nlohmann::ordered_json request_json(const CompletionRequest& r) {
  nlohmann::ordered_json j;
  j["model"] = r.model;
  j["prompt"] = r.prompt;
  j["temperature"] = r.temperature;
  j["max_tokens"] = r.max_tokens;
  j["stop"] = r.stop;
  j["template_version"] = r.template_version;
  return j;
}

nlohmann::ordered_json response_json(const CompletionResponse& r) {
  nlohmann::ordered_json j;
  j["text"] = r.text;
  j["prompt_tokens"] = r.prompt_tokens;
  j["completion_tokens"] = r.completion_tokens;
  j["latency_ms"] = r.latency_ms;
  j["truncated"] = r.truncated;
  j["source"] = to_string(r.source);
  return j;
}

CompletionResponse response_from_json(const nlohmann::json& j) {
  CompletionResponse r;
  r.text = j.at("text").get<std::string>();
  r.prompt_tokens = j.at("prompt_tokens").get<int>();
  r.completion_tokens = j.at("completion_tokens").get<int>();
  r.latency_ms = j.at("latency_ms").get<int>();
  r.truncated = j.at("truncated").get<bool>();
  const auto source = response_source_from_string(j.at("source").get<std::string>());
  if (!source) throw std::runtime_error("bad source");
  r.source = *source;
  if (r.prompt_tokens < 0 || r.completion_tokens < 0 || r.latency_ms < 0) {
    throw std::runtime_error("negative counter");
  }
  return r;
}

}  // namespace

void write_entry(const std::string& dir, const CompletionRequest& request,
                 const CompletionResponse& response) {
  fs::create_directories(dir);
  const std::string digest = request_digest(request);
  nlohmann::ordered_json doc;
  doc["request"] = request_json(request);
  doc["response"] = response_json(response);

  // Write-to-temp then atomic rename: concurrent writers of one key converge.
  const fs::path final_path = entry_path(dir, digest);
  const fs::path tmp_path = final_path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp_path.string());
    out << doc.dump(2) << '\n';
  }
  fs::rename(tmp_path, final_path);
}

ReadResult read_entry(const std::string& dir, const CompletionRequest& request) {
  const std::string digest = request_digest(request);
  const fs::path path = entry_path(dir, digest);
  std::ifstream in(path, std::ios::binary);
  if (!in) return {};
  try {
    nlohmann::json doc = nlohmann::json::parse(in);
    return {response_from_json(doc.at("response")), false};
  } catch (const std::exception&) {
    return {std::nullopt, true};
  }
}

void record(const std::string& dir,
            const std::vector<std::pair<CompletionRequest, CompletionResponse>>& pairs) {
  fs::create_directories(dir);
  for (const auto& [request, response] : pairs) write_entry(dir, request, response);
}

}  // namespace fixture_store

CompletionResponse ReplayBackend::complete(const CompletionRequest& request) {
  auto result = fixture_store::read_entry(dir_, request);
  if (!result.response) throw FixtureMiss(request_digest(request));
  CompletionResponse response = std::move(*result.response);
  response.source = ResponseSource::replay;
  return response;
}

CompletionResponse CachedBackend::complete(const CompletionRequest& request) {
  auto cached = fixture_store::read_entry(dir_, request);
  if (cached.corrupt && ledger_) ledger_->record_cache_corrupt();
  if (cached.response) {
    CompletionResponse response = std::move(*cached.response);
    response.source = ResponseSource::cache;
    return response;
  }
  CompletionResponse response = inner_.complete(request);
  fixture_store::write_entry(dir_, request, response);
  return response;
}

}  // namespace loteval
