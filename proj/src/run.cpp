#include "loteval/run.hpp"

#include <atomic>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "loteval/digest.hpp"

namespace fs = std::filesystem;

namespace loteval {

void RunConfig::validate() const {
  if (strategies.empty()) throw std::invalid_argument("config: strategies must be non-empty");
  if (per_charge < 1) throw std::invalid_argument("config: per_charge must be >= 1");
  if (parallelism < 1) throw std::invalid_argument("config: parallelism must be >= 1");
  if (backend.kind == BackendConfig::Kind::replay && backend.fixture_dir.empty()) {
    throw std::invalid_argument("config: replay backend needs backend.fixture_dir");
  }
  if (backend.temperature < 0.0 || backend.temperature > 2.0) {
    throw std::invalid_argument("config: temperature must be in [0, 2]");
  }
  if (backend.max_tokens < 1) throw std::invalid_argument("config: max_tokens must be >= 1");
}

nlohmann::ordered_json config_to_json(const RunConfig& config) {
  nlohmann::ordered_json j;
  j["corpus"] = config.corpus_path;
  j["lexicon"] = config.lexicon_path;
  j["templates"] = config.template_path;
  j["parse_rules"] = config.parse_rules_path;
  std::vector<std::string> names;
  for (const auto s : config.strategies) names.emplace_back(to_string(s));
  j["strategies"] = names;
  j["seed"] = config.seed;
  j["per_charge"] = config.per_charge;
  nlohmann::ordered_json b;
  b["kind"] = config.backend.kind == BackendConfig::Kind::live ? "live" : "replay";
  b["model"] = config.backend.model;
  b["base_url"] = config.backend.base_url;
  b["path"] = config.backend.path;
  b["api_key_env"] = config.backend.api_key_env;
  b["temperature"] = config.backend.temperature;
  b["max_tokens"] = config.backend.max_tokens;
  b["stop"] = config.backend.stop;
  b["fixture_dir"] = config.backend.fixture_dir;
  b["timeout_s"] = config.backend.timeout_s;
  b["max_retries"] = config.backend.max_retries;
  b["initial_backoff_ms"] = config.backend.initial_backoff_ms;
  j["backend"] = b;
  j["cache_dir"] = config.cache_dir;
  j["parallelism"] = config.parallelism;
  j["output_dir"] = config.output_dir;
  j["match"] = config.match == MatchMode::exact_set ? "exact_set" : "contains_gold";
  return j;
}

namespace {

template <typename T>
void take(const nlohmann::json& doc, const char* key, T& into) {
  if (doc.contains(key)) into = doc[key].get<T>();
}

}  // namespace

RunConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("config: top level must be an object");
  static const std::set<std::string> known = {
      "corpus",  "lexicon",    "templates",   "parse_rules", "strategies", "seed",
      "per_charge", "backend", "cache_dir",   "parallelism", "output_dir", "match"};
  static const std::set<std::string> known_backend = {
      "kind",       "model",       "base_url", "path",        "api_key_env",       "temperature",
      "max_tokens", "stop",        "fixture_dir", "timeout_s", "max_retries", "initial_backoff_ms"};
  for (const auto& [key, value] : doc.items()) {
    if (!known.count(key)) throw std::invalid_argument("config: unknown key " + key);
  }

  RunConfig config;
  take(doc, "corpus", config.corpus_path);
  take(doc, "lexicon", config.lexicon_path);
  take(doc, "templates", config.template_path);
  take(doc, "parse_rules", config.parse_rules_path);
  if (doc.contains("strategies")) {
    config.strategies.clear();
    for (const auto& name : doc["strategies"]) {
      const auto s = strategy_from_string(name.get<std::string>());
      if (!s) throw std::invalid_argument("config: unknown strategy " + name.get<std::string>());
      config.strategies.push_back(*s);
    }
  }
  take(doc, "seed", config.seed);
  take(doc, "per_charge", config.per_charge);
  if (doc.contains("backend")) {
    const auto& b = doc["backend"];
    for (const auto& [key, value] : b.items()) {
      if (!known_backend.count(key)) {
        throw std::invalid_argument("config: unknown backend key " + key);
      }
    }
    if (b.contains("kind")) {
      const std::string kind = b["kind"].get<std::string>();
      if (kind == "live") {
        config.backend.kind = BackendConfig::Kind::live;
      } else if (kind == "replay") {
        config.backend.kind = BackendConfig::Kind::replay;
      } else {
        throw std::invalid_argument("config: backend.kind must be live or replay");
      }
    }
    take(b, "model", config.backend.model);
    take(b, "base_url", config.backend.base_url);
    take(b, "path", config.backend.path);
    take(b, "api_key_env", config.backend.api_key_env);
    take(b, "temperature", config.backend.temperature);
    take(b, "max_tokens", config.backend.max_tokens);
    take(b, "stop", config.backend.stop);
    take(b, "fixture_dir", config.backend.fixture_dir);
    take(b, "timeout_s", config.backend.timeout_s);
    take(b, "max_retries", config.backend.max_retries);
    take(b, "initial_backoff_ms", config.backend.initial_backoff_ms);
  }
  take(doc, "cache_dir", config.cache_dir);
  take(doc, "parallelism", config.parallelism);
  take(doc, "output_dir", config.output_dir);
  if (doc.contains("match")) {
    const std::string match = doc["match"].get<std::string>();
    if (match == "exact_set") {
      config.match = MatchMode::exact_set;
    } else if (match == "contains_gold") {
      config.match = MatchMode::contains_gold;
    } else {
      throw std::invalid_argument("config: match must be exact_set or contains_gold");
    }
  }
  return config;
}

RunConfig run_config_from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument("config " + path + ": " + e.what());
  }
  return config_from_json(doc);
}

std::string prediction_to_json_line(const Prediction& p) {
  nlohmann::ordered_json j;
  j["case_id"] = p.case_id;
  j["strategy"] = to_string(p.strategy);
  j["raw"] = p.raw;
  if (p.syllogism) {
    j["syllogism"] = {{"major", p.syllogism->major},
                      {"minor", p.syllogism->minor},
                      {"conclusion", p.syllogism->conclusion}};
  } else {
    j["syllogism"] = nullptr;
  }
  j["judgment_text"] = p.judgment_text;
  j["charges"] = p.charges;
  j["articles"] = p.articles;
  std::vector<std::string> flags;
  for (const auto f : p.flags) flags.emplace_back(to_string(f));
  j["flags"] = flags;
  j["usage"] = {{"prompt_tokens", p.usage.prompt_tokens},
                {"completion_tokens", p.usage.completion_tokens},
                {"latency_ms", p.usage.latency_ms},
                {"source", p.usage.source}};
  return j.dump();
}

Prediction prediction_from_json_line(const std::string& line, int line_no) {
  nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw MalformedLine(line_no, "not a JSON object");
  }
  Prediction p;
  try {
    p.case_id = j.at("case_id").get<std::string>();
    const auto strategy = strategy_from_string(j.at("strategy").get<std::string>());
    if (!strategy) throw MalformedLine(line_no, "unknown strategy");
    p.strategy = *strategy;
    p.raw = j.at("raw").get<std::string>();
    if (j.contains("syllogism") && !j["syllogism"].is_null()) {
      Syllogism s;
      s.major = j["syllogism"].at("major").get<std::string>();
      s.minor = j["syllogism"].at("minor").get<std::string>();
      s.conclusion = j["syllogism"].at("conclusion").get<std::string>();
      p.syllogism = std::move(s);
    }
    p.judgment_text = j.at("judgment_text").get<std::string>();
    p.charges = j.at("charges").get<std::vector<std::string>>();
    p.articles = j.at("articles").get<std::vector<int>>();
    for (const auto& name : j.at("flags")) {
      const auto flag = prediction_flag_from_string(name.get<std::string>());
      if (!flag) throw MalformedLine(line_no, "unknown flag");
      p.flags.insert(*flag);
    }
    if (j.contains("usage")) {
      const auto& u = j["usage"];
      p.usage.prompt_tokens = u.value("prompt_tokens", 0);
      p.usage.completion_tokens = u.value("completion_tokens", 0);
      p.usage.latency_ms = u.value("latency_ms", 0);
      p.usage.source = u.value("source", std::string("live"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw MalformedLine(line_no, e.what());
  }
  return p;
}

void write_predictions(const std::string& path, const std::vector<Prediction>& predictions) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& p : predictions) out << prediction_to_json_line(p) << '\n';
}

std::vector<Prediction> read_predictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path);
  std::vector<Prediction> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    out.push_back(prediction_from_json_line(line, line_no));
  }
  return out;
}

std::string iso8601_utc_now() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

nlohmann::ordered_json manifest_to_json(const RunManifest& manifest) {
  nlohmann::ordered_json j;
  j["config"] = manifest.config;
  j["template_version"] = manifest.template_version;
  j["corpus_digest"] = manifest.corpus_digest;
  j["sampled_case_ids"] = manifest.sampled_case_ids;
  j["started_at"] = manifest.started_at;
  j["finished_at"] = manifest.finished_at;
  j["usage"] = {{"prompt_tokens", manifest.usage.prompt_tokens},
                {"completion_tokens", manifest.usage.completion_tokens},
                {"live_calls", manifest.usage.live_calls},
                {"cache_hits", manifest.usage.cache_hits},
                {"replay_hits", manifest.usage.replay_hits},
                {"retries", manifest.usage.retries},
                {"errors", manifest.usage.errors},
                {"cache_corrupt", manifest.usage.cache_corrupt}};
  return j;
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << manifest_to_json(manifest).dump(2) << '\n';
}

std::string run_key(const RunConfig& config, const std::string& corpus_digest,
                    const std::string& template_version) {
  CanonicalEncoder enc;
  std::vector<std::string> names;
  for (const auto s : config.strategies) names.emplace_back(to_string(s));
  enc.field("corpus_digest", std::string_view(corpus_digest))
      .field("seed", static_cast<long long>(config.seed))
      .field("per_charge", static_cast<long long>(config.per_charge))
      .field_list("strategies", names)
      .field("template_version", std::string_view(template_version))
      .field("model", std::string_view(config.backend.model))
      .field("temperature", config.backend.temperature)
      .field("max_tokens", static_cast<long long>(config.backend.max_tokens))
      .field_list("stop", config.backend.stop);
  return enc.sha256().substr(0, 16);
}

namespace {

struct Checkpoint {
  std::map<std::pair<std::string, std::string>, Prediction> done;  // (strategy, case_id)
};

Checkpoint load_checkpoint(const std::string& path, const std::string& key) {
  Checkpoint ckpt;
  std::ifstream in(path);
  if (!in) return ckpt;
  std::string line;
  if (!std::getline(in, line)) return ckpt;
  nlohmann::json header = nlohmann::json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object() || header.value("run_key", "") != key) {
    return ckpt;  // different run; start over
  }
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      Prediction p = prediction_from_json_line(line, line_no);
      ckpt.done[{std::string(to_string(p.strategy)), p.case_id}] = std::move(p);
    } catch (const MalformedLine&) {
      break;  // torn tail write from an interrupted run; resume before it
    }
  }
  return ckpt;
}

}  // namespace

std::vector<Prediction> run_predictions(const std::vector<CaseRecord>& sample,
                                        const std::vector<Strategy>& strategies,
                                        const TemplateSet& templates, CompletionBackend& backend,
                                        const BackendConfig& backend_config,
                                        const ChargeLexicon& lexicon, const ParseRules& rules,
                                        int parallelism, UsageLedger& ledger,
                                        const std::string& checkpoint_path,
                                        const std::string& checkpoint_key) {
  if (strategies.empty()) throw std::invalid_argument("run: no strategies");
  if (parallelism < 1) throw std::invalid_argument("run: parallelism must be >= 1");

  struct Task {
    std::size_t strategy_index;
    const CaseRecord* record;
  };
  std::vector<Task> tasks;
  tasks.reserve(sample.size() * strategies.size());
  for (std::size_t si = 0; si < strategies.size(); ++si) {
    std::set<std::string> seen;
    for (const auto& record : sample) {
      if (!seen.insert(record.id).second) {
        throw std::invalid_argument("run: duplicate case id in sample: " + record.id);
      }
      tasks.push_back({si, &record});
    }
  }

  std::vector<std::optional<Prediction>> results(tasks.size());

  std::ofstream ckpt_out;
  std::mutex ckpt_mu;
  if (!checkpoint_path.empty()) {
    const std::string key =
        !checkpoint_key.empty()
            ? checkpoint_key
            : sha256_hex(templates.version() + "|" + backend_config.model + "|" +
                         canonical_double(backend_config.temperature) + "|" +
                         std::to_string(backend_config.max_tokens))
                  .substr(0, 16);
    Checkpoint ckpt = load_checkpoint(checkpoint_path, key);
    const bool resuming = !ckpt.done.empty();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      const auto it = ckpt.done.find(
          {std::string(to_string(strategies[tasks[i].strategy_index])), tasks[i].record->id});
      if (it != ckpt.done.end()) results[i] = it->second;
    }
    ckpt_out.open(checkpoint_path,
                  resuming ? std::ios::binary | std::ios::app : std::ios::binary | std::ios::trunc);
    if (!ckpt_out) throw std::runtime_error("cannot write checkpoint " + checkpoint_path);
    if (!resuming) {
      nlohmann::ordered_json header;
      header["run_key"] = key;
      ckpt_out << header.dump() << '\n' << std::flush;
    }
  }

  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mu;

  const auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || failed.load()) return;
      if (results[i]) continue;
      try {
        const Task& task = tasks[i];
        const Strategy strategy = strategies[task.strategy_index];
        const PromptBundle bundle =
            templates.render(strategy, task.record->fact, task.record->id);

        CompletionRequest request;
        request.model = backend_config.model;
        request.prompt = bundle.text;
        request.temperature = backend_config.temperature;
        request.max_tokens = backend_config.max_tokens;
        request.stop = backend_config.stop;
        request.template_version = bundle.template_version;

        const CompletionResponse response = backend.complete(request);
        ledger.record(request.model, response);

        Prediction p = parse_prediction(task.record->id, strategy, response.text,
                                        response.truncated, lexicon, rules);
        p.usage.prompt_tokens = response.prompt_tokens;
        p.usage.completion_tokens = response.completion_tokens;
        p.usage.latency_ms = response.latency_ms;
        p.usage.source = std::string(to_string(response.source));

        if (ckpt_out.is_open()) {
          std::lock_guard lock(ckpt_mu);
          ckpt_out << prediction_to_json_line(p) << '\n' << std::flush;
        }
        results[i] = std::move(p);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  const std::size_t n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(parallelism), std::max<std::size_t>(tasks.size(), 1));
  std::vector<std::thread> threads;
  threads.reserve(n_threads);
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (first_error) std::rethrow_exception(first_error);

  std::vector<Prediction> out;
  out.reserve(tasks.size());
  for (auto& r : results) out.push_back(std::move(*r));
  std::stable_sort(out.begin(), out.end(), [&](const Prediction& a, const Prediction& b) {
    const auto index = [&](Strategy s) {
      return std::find(strategies.begin(), strategies.end(), s) - strategies.begin();
    };
    const auto ia = index(a.strategy), ib = index(b.strategy);
    if (ia != ib) return ia < ib;
    return a.case_id < b.case_id;
  });
  return out;
}

EvalReport score_predictions(const std::vector<Prediction>& predictions,
                             const std::vector<CaseRecord>& sample,
                             const std::vector<Strategy>& strategies,
                             const ChargeLexicon& lexicon, const std::string& model,
                             const std::string& template_version, MatchMode match) {
  if (predictions.empty()) throw AlignmentError("no predictions to score");

  std::map<std::string, std::set<std::string>> gold_by_case;
  std::map<std::string, std::string> gold_charge_by_case;
  for (const auto& record : sample) {
    if (record.gold_charges.size() != 1) {
      throw AlignmentError("sample case " + record.id + " does not have exactly one gold charge");
    }
    gold_by_case[record.id] = record.gold_charges;
    gold_charge_by_case[record.id] = *record.gold_charges.begin();
  }

  std::set<std::pair<std::string, std::string>> expected;  // (strategy, case_id)
  for (const auto s : strategies) {
    for (const auto& record : sample) expected.emplace(std::string(to_string(s)), record.id);
  }
  std::set<std::pair<std::string, std::string>> got;
  for (const auto& p : predictions) {
    if (!got.emplace(std::string(to_string(p.strategy)), p.case_id).second) {
      throw AlignmentError("duplicate prediction for case " + p.case_id);
    }
    if (!gold_by_case.count(p.case_id)) {
      throw AlignmentError("prediction for unknown case " + p.case_id);
    }
  }
  if (got != expected) {
    throw AlignmentError("predictions do not cover the sample exactly (" +
                         std::to_string(got.size()) + " vs " + std::to_string(expected.size()) +
                         " expected pairs)");
  }

  std::vector<Prediction> ordered = predictions;
  std::stable_sort(ordered.begin(), ordered.end(), [&](const Prediction& a, const Prediction& b) {
    const auto index = [&](Strategy s) {
      return std::find(strategies.begin(), strategies.end(), s) - strategies.begin();
    };
    const auto ia = index(a.strategy), ib = index(b.strategy);
    if (ia != ib) return ia < ib;
    return a.case_id < b.case_id;
  });

  std::vector<Verdict> verdicts;
  verdicts.reserve(ordered.size());
  for (const auto& p : ordered) verdicts.push_back(judge(p, gold_by_case.at(p.case_id), match));

  std::vector<std::string> charge_order = lexicon.targets();
  if (charge_order.empty()) {
    std::set<std::string> present;
    for (const auto& [id, charge] : gold_charge_by_case) present.insert(charge);
    charge_order.assign(present.begin(), present.end());
  }

  EvalReport report = build_report(verdicts, ordered, gold_charge_by_case, charge_order,
                                   strategies, model, template_version);
  for (const auto& charge : charge_order) {
    report.charge_labels[charge] = lexicon.display_label(charge);
  }
  return report;
}

}  // namespace loteval
