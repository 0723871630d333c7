#include "loteval/parse.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <map>
#include <mutex>
#include <regex>

#include <json.hpp>

namespace loteval {

LabelTable LabelTable::defaults() {
  return LabelTable{
      {"major premise:", "大前提：", "大前提:"},
      {"minor premise:", "小前提：", "小前提:"},
      {"conclusion:", "结论：", "结论:"},
  };
}

ParseRules ParseRules::defaults() {
  return ParseRules{
      LabelTable::defaults(),
      {R"(article\s+([0-9]+))", R"(第\s*([0-9]+)\s*条)"},
  };
}

ParseRules ParseRules::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("parse rules " + path + ": " + e.what());
  }
  ParseRules rules = defaults();
  if (doc.contains("labels")) {
    const auto& labels = doc["labels"];
    if (labels.contains("major")) rules.labels.major = labels["major"].get<std::vector<std::string>>();
    if (labels.contains("minor")) rules.labels.minor = labels["minor"].get<std::vector<std::string>>();
    if (labels.contains("conclusion")) {
      rules.labels.conclusion = labels["conclusion"].get<std::vector<std::string>>();
    }
  }
  if (doc.contains("article_patterns")) {
    rules.article_patterns = doc["article_patterns"].get<std::vector<std::string>>();
  }
  return rules;
}

std::string_view to_string(PredictionFlag f) noexcept {
  switch (f) {
    case PredictionFlag::unstructured:
      return "unstructured";
    case PredictionFlag::truncated:
      return "truncated";
    case PredictionFlag::no_charge_found:
      return "no_charge_found";
    case PredictionFlag::article_mismatch:
      return "article_mismatch";
  }
  return "unstructured";
}

std::optional<PredictionFlag> prediction_flag_from_string(std::string_view name) noexcept {
  if (name == "unstructured") return PredictionFlag::unstructured;
  if (name == "truncated") return PredictionFlag::truncated;
  if (name == "no_charge_found") return PredictionFlag::no_charge_found;
  if (name == "article_mismatch") return PredictionFlag::article_mismatch;
  return std::nullopt;
}

namespace {

struct Line {
  std::size_t begin;  // offset of first byte
  std::size_t end;    // offset one past last byte, excluding the newline
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n') {
      std::size_t end = i;
      if (end > start && text[end - 1] == '\r') --end;
      lines.push_back({start, end});
      start = i + 1;
    }
  }
  return lines;
}

// Offset just past the label when this line starts with one of them
// (leading whitespace allowed, ASCII case-insensitive).
std::optional<std::size_t> match_label(std::string_view text, const Line& line,
                                       const std::vector<std::string>& labels) {
  std::string_view content = text.substr(line.begin, line.end - line.begin);
  const std::string_view stripped = trim(content);
  const std::size_t lead = line.begin + (stripped.data() - content.data());
  const std::string folded = fold_ascii(stripped);
  for (const auto& label : labels) {
    const std::string folded_label = fold_ascii(label);
    if (folded.size() >= folded_label.size() &&
        folded.compare(0, folded_label.size(), folded_label) == 0) {
      return lead + folded_label.size();
    }
  }
  return std::nullopt;
}

}  // namespace

std::optional<Syllogism> parse_syllogism(std::string_view text, const LabelTable& labels) {
  const auto lines = split_lines(text);

  struct Hit {
    std::size_t line_index;
    std::size_t content_begin;
  };
  std::optional<Hit> major, minor, conclusion;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!major) {
      if (auto off = match_label(text, lines[i], labels.major)) major = Hit{i, *off};
    }
    if (!minor) {
      if (auto off = match_label(text, lines[i], labels.minor)) minor = Hit{i, *off};
    }
    if (!conclusion) {
      if (auto off = match_label(text, lines[i], labels.conclusion)) conclusion = Hit{i, *off};
    }
  }
  if (!major || !minor || !conclusion) return std::nullopt;
  if (!(major->line_index < minor->line_index && minor->line_index < conclusion->line_index)) {
    return std::nullopt;
  }

  const auto slice = [&](std::size_t from, std::size_t to_line) {
    const std::size_t to = to_line < lines.size() ? lines[to_line].begin : text.size();
    const std::size_t end = to > from ? to : from;
    return std::string(trim(text.substr(from, end - from)));
  };
  Syllogism s;
  s.major = slice(major->content_begin, minor->line_index);
  s.minor = slice(minor->content_begin, conclusion->line_index);
  s.conclusion = std::string(trim(text.substr(conclusion->content_begin)));
  if (s.major.empty() || s.minor.empty() || s.conclusion.empty()) return std::nullopt;
  return s;
}

std::string syllogism_to_text(const Syllogism& s) {
  return "Major premise: " + s.major + "\n\nMinor premise: " + s.minor +
         "\n\nConclusion: " + s.conclusion;
}

std::string extract_judgment(std::string_view text) {
  if (trim(text).empty()) throw EmptyOutput();
  const auto lines = split_lines(text);
  const auto blank = [&](const Line& line) {
    return trim(text.substr(line.begin, line.end - line.begin)).empty();
  };
  std::size_t last = lines.size();
  for (std::size_t i = lines.size(); i-- > 0;) {
    if (!blank(lines[i])) {
      last = i;
      break;
    }
  }
  std::size_t first = last;
  while (first > 0 && !blank(lines[first - 1])) --first;
  return std::string(trim(text.substr(lines[first].begin, lines[last].end - lines[first].begin)));
}

namespace {

bool ascii_letter(char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

}  // namespace

std::vector<std::string> extract_charges(std::string_view judgment_text,
                                         const ChargeLexicon& lexicon) {
  const std::string folded = fold_ascii(judgment_text);
  const auto& aliases = lexicon.aliases_longest_first();

  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < folded.size()) {
    std::size_t advance = 1;
    for (const auto& [alias, id] : aliases) {
      if (alias.size() > folded.size() - i) continue;
      if (folded.compare(i, alias.size(), alias) != 0) continue;
      if (ascii_letter(alias.front()) && i > 0 && ascii_letter(folded[i - 1])) continue;
      const std::size_t after = i + alias.size();
      if (ascii_letter(alias.back()) && after < folded.size() && ascii_letter(folded[after])) {
        continue;
      }
      if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
      advance = alias.size();
      break;  // aliases are longest-first; the first hit wins this position
    }
    i += advance;
  }
  return out;
}

namespace {

const std::regex& compiled_pattern(const std::string& pattern) {
  static std::mutex mu;
  static std::map<std::string, std::regex> cache;
  std::lock_guard lock(mu);
  auto it = cache.find(pattern);
  if (it == cache.end()) {
    it = cache.emplace(pattern, std::regex(pattern, std::regex::ECMAScript | std::regex::icase))
             .first;
  }
  return it->second;
}

}  // namespace

std::vector<int> extract_articles(std::string_view text,
                                  const std::vector<std::string>& patterns) {
  std::vector<std::pair<std::size_t, int>> hits;  // (position, article number)
  const std::string haystack(text);
  for (const auto& pattern : patterns) {
    const std::regex& re = compiled_pattern(pattern);
    for (auto it = std::sregex_iterator(haystack.begin(), haystack.end(), re);
         it != std::sregex_iterator(); ++it) {
      if (it->size() < 2) continue;
      const std::string digits = (*it)[1].str();
      long long value = 0;
      const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
      if (ec != std::errc{} || ptr != digits.data() + digits.size()) continue;
      if (value <= 0 || value > std::numeric_limits<int>::max()) continue;
      hits.emplace_back(static_cast<std::size_t>(it->position(1)), static_cast<int>(value));
    }
  }
  std::stable_sort(hits.begin(), hits.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<int> out;
  for (const auto& [pos, value] : hits) {
    if (std::find(out.begin(), out.end(), value) == out.end()) out.push_back(value);
  }
  return out;
}

std::vector<int> extract_articles(std::string_view text) {
  return extract_articles(text, ParseRules::defaults().article_patterns);
}

void verify_articles(Prediction& prediction, const ChargeLexicon& lexicon) {
  if (prediction.articles.empty()) return;
  for (const auto& charge : prediction.charges) {
    const auto expected = lexicon.article_for(charge);
    if (!expected) continue;  // unverifiable
    if (std::find(prediction.articles.begin(), prediction.articles.end(), *expected) ==
        prediction.articles.end()) {
      prediction.flags.insert(PredictionFlag::article_mismatch);
      return;
    }
  }
}

Prediction parse_prediction(std::string case_id, Strategy strategy, std::string raw,
                            bool truncated, const ChargeLexicon& lexicon,
                            const ParseRules& rules) {
  Prediction p;
  p.case_id = std::move(case_id);
  p.strategy = strategy;
  p.raw = std::move(raw);
  p.syllogism = parse_syllogism(p.raw, rules.labels);
  if (p.syllogism) {
    // The designed output format wins; last-paragraph is the fallback rule.
    p.judgment_text = p.syllogism->conclusion;
  } else if (!trim(p.raw).empty()) {
    p.judgment_text = extract_judgment(p.raw);
  }
  p.charges = extract_charges(p.judgment_text, lexicon);
  p.articles = extract_articles(p.raw, rules.article_patterns);
  if (!p.syllogism) p.flags.insert(PredictionFlag::unstructured);
  if (truncated) p.flags.insert(PredictionFlag::truncated);
  if (p.charges.empty()) p.flags.insert(PredictionFlag::no_charge_found);
  verify_articles(p, lexicon);
  return p;
}

}  // namespace loteval
