#include "loteval/corpus.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "loteval/digest.hpp"

namespace loteval {

namespace {

bool is_space_byte(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

// U+3000 in UTF-8 is E3 80 80.
bool starts_with_ideographic_space(std::string_view s) {
  return s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xe3 &&
         static_cast<unsigned char>(s[1]) == 0x80 && static_cast<unsigned char>(s[2]) == 0x80;
}

}  // namespace

std::string_view trim(std::string_view s) noexcept {
  for (;;) {
    if (!s.empty() && is_space_byte(s.front())) {
      s.remove_prefix(1);
    } else if (starts_with_ideographic_space(s)) {
      s.remove_prefix(3);
    } else {
      break;
    }
  }
  for (;;) {
    if (!s.empty() && is_space_byte(s.back())) {
      s.remove_suffix(1);
    } else if (s.size() >= 3 && starts_with_ideographic_space(s.substr(s.size() - 3))) {
      s.remove_suffix(3);
    } else {
      break;
    }
  }
  return s;
}

std::string fold_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

ChargeLexicon ChargeLexicon::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw LexiconError("lexicon " + path + ": " + e.what());
  }
  return from_json(doc);
}

ChargeLexicon ChargeLexicon::from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw LexiconError("lexicon: top level must be an object");
  ChargeLexicon lex;
  lex.version_ = doc.value("version", std::string("unversioned"));
  if (!doc.contains("charges") || !doc["charges"].is_array()) {
    throw LexiconError("lexicon: missing charges array");
  }
  for (const auto& item : doc["charges"]) {
    Entry e;
    e.id = item.at("id").get<std::string>();
    e.short_label = item.value("short", std::string());
    if (item.contains("aliases")) {
      for (const auto& a : item["aliases"]) e.aliases.push_back(a.get<std::string>());
    }
    if (item.contains("article")) {
      const int n = item["article"].get<int>();
      if (n <= 0) throw LexiconError("lexicon: article for " + e.id + " must be > 0");
      e.article = n;
    }
    lex.entries_.push_back(std::move(e));
  }
  if (doc.contains("targets")) {
    for (const auto& t : doc["targets"]) lex.targets_.push_back(t.get<std::string>());
  }
  lex.validate_and_index();
  return lex;
}

void ChargeLexicon::validate_and_index() {
  for (auto& e : entries_) {
    if (e.id.empty()) throw LexiconError("lexicon: empty charge id");
    // The canonical id is always a member of its own alias set.
    const std::string folded_id = fold_ascii(trim(e.id));
    bool has_self = false;
    for (const auto& a : e.aliases) {
      if (fold_ascii(trim(a)) == folded_id) has_self = true;
    }
    if (!has_self) e.aliases.insert(e.aliases.begin(), e.id);
    if (e.aliases.empty()) throw LexiconError("lexicon: " + e.id + " has no aliases");

    for (const auto& a : e.aliases) {
      std::string folded = fold_ascii(trim(a));
      if (folded.empty()) throw LexiconError("lexicon: empty alias under " + e.id);
      auto [it, inserted] = alias_to_id_.emplace(folded, e.id);
      if (!inserted && it->second != e.id) {
        throw LexiconError("lexicon: alias \"" + a + "\" claimed by both " + it->second +
                           " and " + e.id);
      }
    }
  }
  for (const auto& t : targets_) {
    if (!has_charge(t)) throw LexiconError("lexicon: target " + t + " has no charge entry");
  }
  for (const auto& [alias, id] : alias_to_id_) scan_aliases_.emplace_back(alias, id);
  std::stable_sort(scan_aliases_.begin(), scan_aliases_.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });
}

bool ChargeLexicon::has_charge(std::string_view id) const {
  return std::any_of(entries_.begin(), entries_.end(),
                     [&](const Entry& e) { return e.id == id; });
}

std::optional<int> ChargeLexicon::article_for(std::string_view id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return e.article;
  }
  return std::nullopt;
}

std::string ChargeLexicon::display_label(std::string_view id) const {
  for (const auto& e : entries_) {
    if (e.id == id) return e.short_label.empty() ? e.id : e.short_label;
  }
  return std::string(id);
}

std::optional<std::string> ChargeLexicon::normalize(std::string_view surface) const {
  const std::string key = fold_ascii(trim(surface));
  if (key.empty()) return std::nullopt;
  auto it = alias_to_id_.find(key);
  if (it == alias_to_id_.end()) return std::nullopt;
  return it->second;
}

namespace {

std::string padded_line_id(int line) {
  std::string n = std::to_string(line);
  if (n.size() < 6) n.insert(0, 6 - n.size(), '0');
  return n;
}

CaseRecord record_from_line(const std::string& line, int line_no, const ChargeLexicon& lexicon) {
  nlohmann::json doc = nlohmann::json::parse(line, nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw MalformedLine(line_no, "not a JSON object");

  CaseRecord rec;
  if (doc.contains("id")) {
    if (doc["id"].is_string()) {
      rec.id = doc["id"].get<std::string>();
    } else if (doc["id"].is_number_integer()) {
      rec.id = std::to_string(doc["id"].get<long long>());
    } else {
      throw MalformedLine(line_no, "id must be a string or integer");
    }
  } else {
    rec.id = padded_line_id(line_no);
  }

  if (!doc.contains("fact") || !doc["fact"].is_string()) {
    throw MalformedLine(line_no, "missing fact field");
  }
  rec.fact = doc["fact"].get<std::string>();
  if (trim(rec.fact).empty()) throw MalformedLine(line_no, "fact is empty");

  if (!doc.contains("meta") || !doc["meta"].is_object()) {
    throw MalformedLine(line_no, "missing meta object");
  }
  rec.raw_meta = doc["meta"];

  const auto& meta = doc["meta"];
  if (!meta.contains("accusation") || !meta["accusation"].is_array()) {
    throw MalformedLine(line_no, "meta.accusation missing or not a list");
  }
  for (const auto& a : meta["accusation"]) {
    if (!a.is_string()) throw MalformedLine(line_no, "meta.accusation entries must be strings");
    if (auto id = lexicon.normalize(a.get<std::string>())) rec.gold_charges.insert(*id);
  }

  if (!meta.contains("relevant_articles") || !meta["relevant_articles"].is_array()) {
    throw MalformedLine(line_no, "meta.relevant_articles missing or not a list");
  }
  for (const auto& n : meta["relevant_articles"]) {
    if (!n.is_number_integer()) throw MalformedLine(line_no, "relevant_articles must be integers");
    const int v = n.get<int>();
    if (v <= 0) throw MalformedLine(line_no, "relevant_articles must be > 0");
    rec.gold_articles.push_back(v);
  }
  return rec;
}

}  // namespace

LoadResult load_corpus(const std::string& path, const ChargeLexicon& lexicon,
                       const LoadOptions& options) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path);

  LoadResult result;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    try {
      result.records.push_back(record_from_line(line, line_no, lexicon));
    } catch (const MalformedLine&) {
      if (!options.lenient) throw;
      ++result.skipped_lines;
    }
  }
  return result;
}

std::vector<CaseRecord> load_corpus(const std::string& path, const ChargeLexicon& lexicon) {
  return load_corpus(path, lexicon, LoadOptions{}).records;
}

std::string serialize_record(const CaseRecord& record) {
  nlohmann::ordered_json doc;
  doc["id"] = record.id;
  doc["fact"] = record.fact;
  nlohmann::json meta = record.raw_meta.is_object() ? record.raw_meta : nlohmann::json::object();
  meta["accusation"] = std::vector<std::string>(record.gold_charges.begin(),
                                                record.gold_charges.end());
  meta["relevant_articles"] = record.gold_articles;
  doc["meta"] = meta;
  return doc.dump();
}

void write_corpus(const std::string& path, const std::vector<CaseRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const auto& r : records) out << serialize_record(r) << '\n';
}

std::vector<CaseRecord> filter_single_charge(const std::vector<CaseRecord>& records,
                                             const std::set<std::string>& target) {
  if (target.empty()) throw std::invalid_argument("filter_single_charge: empty target set");
  std::vector<CaseRecord> out;
  for (const auto& r : records) {
    if (r.gold_charges.size() == 1 && target.count(*r.gold_charges.begin())) {
      out.push_back(r);
    }
  }
  return out;
}

std::vector<CaseRecord> stratified_sample(const std::vector<CaseRecord>& records, int per_charge,
                                          std::uint64_t seed,
                                          const std::vector<std::string>& targets) {
  if (per_charge <= 0) throw std::invalid_argument("stratified_sample: per_charge must be >= 1");

  // Group candidates by their sole charge; input may only contain
  // single-charge records (filter_single_charge's postcondition).
  std::map<std::string, std::vector<const CaseRecord*>> strata;
  for (const auto& r : records) {
    if (r.gold_charges.size() != 1) {
      throw std::invalid_argument("stratified_sample: record " + r.id +
                                  " does not have exactly one gold charge");
    }
    strata[*r.gold_charges.begin()].push_back(&r);
  }
  if (!targets.empty()) {
    for (const auto& t : targets) {
      const auto it = strata.find(t);
      const int have = it == strata.end() ? 0 : static_cast<int>(it->second.size());
      if (have < per_charge) throw InsufficientStratum(t, have, per_charge);
    }
    for (auto it = strata.begin(); it != strata.end();) {
      if (std::find(targets.begin(), targets.end(), it->first) == targets.end()) {
        it = strata.erase(it);
      } else {
        ++it;
      }
    }
  }

  std::vector<CaseRecord> out;
  for (auto& [charge, candidates] : strata) {
    if (static_cast<int>(candidates.size()) < per_charge) {
      throw InsufficientStratum(charge, static_cast<int>(candidates.size()), per_charge);
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const CaseRecord* a, const CaseRecord* b) { return a->id < b->id; });
    SplitMix64 rng(seed ^ fnv1a64(charge));
    for (std::size_t i = candidates.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.next_below(i + 1));
      std::swap(candidates[i], candidates[j]);
    }
    std::vector<const CaseRecord*> picked(candidates.begin(), candidates.begin() + per_charge);
    std::sort(picked.begin(), picked.end(),
              [](const CaseRecord* a, const CaseRecord* b) { return a->id < b->id; });
    for (const auto* p : picked) out.push_back(*p);
  }
  return out;  // strata map iterates in charge-id order, records id-sorted within
}

}  // namespace loteval
