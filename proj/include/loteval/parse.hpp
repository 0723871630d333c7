#pragma once

#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "loteval/corpus.hpp"
#include "loteval/prompts.hpp"

namespace loteval {

struct EmptyOutput : std::runtime_error {
  EmptyOutput() : std::runtime_error("model output is empty") {}
};

// The three parts of a syllogism-formatted output. Parts are non-empty by
// construction; an output that does not decompose is represented by absence.
struct Syllogism {
  std::string major;       // law article text
  std::string minor;       // fact application
  std::string conclusion;  // judgment

  bool operator==(const Syllogism&) const = default;
};

// Label spellings recognized at line starts, case-insensitive. Data, not
// code: English and Chinese defaults ship built in, more load from a file.
struct LabelTable {
  std::vector<std::string> major;
  std::vector<std::string> minor;
  std::vector<std::string> conclusion;

  static LabelTable defaults();
};

// Regexes with one capture group for statute article numbers.
struct ParseRules {
  LabelTable labels;
  std::vector<std::string> article_patterns;

  static ParseRules defaults();
  static ParseRules from_file(const std::string& path);  // defaults overridden per key
};

enum class PredictionFlag { unstructured, truncated, no_charge_found, article_mismatch };
std::string_view to_string(PredictionFlag f) noexcept;
std::optional<PredictionFlag> prediction_flag_from_string(std::string_view name) noexcept;

struct PredictionUsage {
  int prompt_tokens = 0;
  int completion_tokens = 0;
  int latency_ms = 0;
  std::string source = "live";
};

struct Prediction {
  std::string case_id;
  Strategy strategy = Strategy::baseline;
  std::string raw;
  std::optional<Syllogism> syllogism;
  std::string judgment_text;          // extracted conclusion paragraph
  std::vector<std::string> charges;   // canonical ids, first-occurrence order, deduplicated
  std::vector<int> articles;          // cited statute numbers, appearance order, deduplicated
  std::set<PredictionFlag> flags;
  PredictionUsage usage;
};

// Decompose text along Major premise / Minor premise / Conclusion labels.
// The first occurrence of each label must appear in that order at a line
// start; anything else (or an empty part) yields nullopt.
std::optional<Syllogism> parse_syllogism(std::string_view text, const LabelTable& labels);

// Reassemble a syllogism into default-labeled text (parse_syllogism inverse).
std::string syllogism_to_text(const Syllogism& s);

// Last maximal block of non-blank lines, trimmed. Throws EmptyOutput when the
// whole text trims to nothing.
std::string extract_judgment(std::string_view text);

// Scan for lexicon alias occurrences: longest match first at each position,
// no overlaps, ASCII case-insensitive, and a match may not be flanked by
// ASCII letters (so "grape" never fires a "rape" alias; CJK is unaffected).
std::vector<std::string> extract_charges(std::string_view judgment_text,
                                         const ChargeLexicon& lexicon);

std::vector<int> extract_articles(std::string_view text,
                                  const std::vector<std::string>& patterns);
std::vector<int> extract_articles(std::string_view text);  // default patterns

// Flag article_mismatch when a predicted charge has an expected statute
// number, at least one article was cited, and none of them is the expected
// one. Charges without a statute entry are unverifiable and set nothing.
void verify_articles(Prediction& prediction, const ChargeLexicon& lexicon);

// Full pipeline for one raw model output: syllogism decomposition, judgment
// extraction (conclusion part wins over the last-paragraph rule), charge and
// article extraction, flag computation. Total over arbitrary bytes.
Prediction parse_prediction(std::string case_id, Strategy strategy, std::string raw,
                            bool truncated, const ChargeLexicon& lexicon,
                            const ParseRules& rules);

}  // namespace loteval
