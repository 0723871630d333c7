#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace loteval {

struct FileNotFound : std::runtime_error {
  explicit FileNotFound(const std::string& path)
      : std::runtime_error("file not found: " + path), path(path) {}
  std::string path;
};

struct MalformedLine : std::runtime_error {
  MalformedLine(int line, const std::string& why)
      : std::runtime_error("line " + std::to_string(line) + ": " + why), line(line) {}
  int line;
};

struct InsufficientStratum : std::runtime_error {
  InsufficientStratum(std::string charge_, int have_, int need_)
      : std::runtime_error("stratum " + charge_ + ": have " + std::to_string(have_) +
                           ", need " + std::to_string(need_)),
        charge(std::move(charge_)),
        have(have_),
        need(need_) {}
  std::string charge;
  int have;
  int need;
};

struct LexiconError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One criminal case: the fact description plus its gold judgment fields.
struct CaseRecord {
  std::string id;
  std::string fact;
  std::set<std::string> gold_charges;  // canonical ids
  std::vector<int> gold_articles;      // statute article numbers, all > 0
  nlohmann::json raw_meta;             // source meta object, passed through untouched
};

// Trim ASCII whitespace plus U+3000 (ideographic space) from both ends.
std::string_view trim(std::string_view s) noexcept;

// ASCII-only lowercase fold; bytes outside A-Z are untouched, so UTF-8 stays valid.
std::string fold_ascii(std::string_view s);

// Charge vocabulary: canonical ids, their surface aliases (any script), the
// designated target subset, and optional expected statute article numbers.
class ChargeLexicon {
 public:
  struct Entry {
    std::string id;
    std::string short_label;           // display name for table headers; id if empty
    std::vector<std::string> aliases;  // as loaded; always contains the id itself
    std::optional<int> article;
  };

  static ChargeLexicon from_file(const std::string& path);
  static ChargeLexicon from_json(const nlohmann::json& doc);

  const std::string& version() const noexcept { return version_; }
  const std::vector<std::string>& targets() const noexcept { return targets_; }
  const std::vector<Entry>& entries() const noexcept { return entries_; }

  bool has_charge(std::string_view id) const;
  std::optional<int> article_for(std::string_view id) const;
  std::string display_label(std::string_view id) const;

  // normalize_charge: canonical id whose alias set contains the trimmed,
  // case-folded surface; nullopt when no alias matches.
  std::optional<std::string> normalize(std::string_view surface) const;

  // Folded (alias, canonical id) pairs sorted longest alias first, for the
  // longest-match-first scanner in the parser.
  const std::vector<std::pair<std::string, std::string>>& aliases_longest_first() const noexcept {
    return scan_aliases_;
  }

 private:
  void validate_and_index();

  std::string version_;
  std::vector<std::string> targets_;
  std::vector<Entry> entries_;
  std::map<std::string, std::string, std::less<>> alias_to_id_;  // folded alias -> id
  std::vector<std::pair<std::string, std::string>> scan_aliases_;
};

struct LoadOptions {
  bool lenient = false;  // skip malformed lines instead of aborting
};

struct LoadResult {
  std::vector<CaseRecord> records;
  int skipped_lines = 0;
};

// Load a line-delimited corpus (UTF-8 JSON objects with "fact" and
// "meta": {"accusation": [...], "relevant_articles": [...]}). Accusation
// surfaces are normalized through the lexicon; lines whose accusations all
// fall outside it are kept with empty gold_charges.
LoadResult load_corpus(const std::string& path, const ChargeLexicon& lexicon,
                       const LoadOptions& options);
std::vector<CaseRecord> load_corpus(const std::string& path, const ChargeLexicon& lexicon);

// One corpus line (no trailing newline) in the same schema load_corpus reads.
std::string serialize_record(const CaseRecord& record);
void write_corpus(const std::string& path, const std::vector<CaseRecord>& records);

// Keep records whose gold_charges is exactly one charge from the target set.
std::vector<CaseRecord> filter_single_charge(const std::vector<CaseRecord>& records,
                                             const std::set<std::string>& target);

// Deterministic stratified sample: per stratum, candidates ordered by record
// id are Fisher-Yates shuffled with a SplitMix64 stream seeded by
// (seed XOR fnv1a64(charge id)) and the first per_charge are taken. Output is
// sorted by (charge id, record id). Strata are the distinct sole charges in
// the input unless an explicit target list is given, in which case every
// listed charge must reach per_charge.
std::vector<CaseRecord> stratified_sample(const std::vector<CaseRecord>& records, int per_charge,
                                          std::uint64_t seed,
                                          const std::vector<std::string>& targets = {});

}  // namespace loteval
