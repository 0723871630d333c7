#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "loteval/backend.hpp"
#include "loteval/parse.hpp"
#include "loteval/prompts.hpp"

namespace loteval {

struct EmptyVerdicts : std::runtime_error {
  EmptyVerdicts() : std::runtime_error("no verdicts to score") {}
};

struct AlignmentError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct UnknownFormat : std::runtime_error {
  explicit UnknownFormat(const std::string& name)
      : std::runtime_error("unknown report format: " + name) {}
};

enum class Category { correct, wrong_charge, over_split, no_charge, unparsable };
std::string_view to_string(Category c) noexcept;

// Exact set equality is the scoring rule; contains_gold is a clearly
// non-default lenient option that accepts supersets of the gold charge.
enum class MatchMode { exact_set, contains_gold };

struct Verdict {
  std::string case_id;
  Strategy strategy = Strategy::baseline;
  bool correct = false;
  Category category = Category::no_charge;
  bool article_mismatch = false;
};

Verdict judge(const Prediction& prediction, const std::set<std::string>& gold,
              MatchMode mode = MatchMode::exact_set);

// correct / total. Throws EmptyVerdicts on an empty list.
double micro_accuracy(const std::vector<Verdict>& verdicts);

// Per-stratum accuracy keyed by gold charge; empty strata are absent.
std::map<std::string, double> per_charge_accuracy(
    const std::vector<Verdict>& verdicts,
    const std::map<std::string, std::string>& gold_charge_by_case);

struct CategoryTally {
  std::map<Category, long long> categories;
  long long article_mismatch = 0;
};

// Per-strategy category and flag tallies. article_mismatch counts
// independently of correctness. Throws AlignmentError when the verdict and
// prediction lists do not pair up by (strategy, case id).
std::map<Strategy, CategoryTally> error_taxonomy(const std::vector<Verdict>& verdicts,
                                                 const std::vector<Prediction>& predictions);

struct StrategyStats {
  long long total = 0;
  long long correct = 0;
  std::map<std::string, long long> per_charge_total;
  std::map<std::string, long long> per_charge_correct;
  std::map<Category, long long> categories;
  long long article_mismatch = 0;
  UsageTotals usage;
};

struct EvalReport {
  std::string model;
  std::string template_version;
  std::vector<std::string> charges;            // column order
  std::map<std::string, std::string> charge_labels;  // display names for table headers
  std::vector<Strategy> strategy_order;
  std::map<Strategy, StrategyStats> rows;
};

EvalReport build_report(const std::vector<Verdict>& verdicts,
                        const std::vector<Prediction>& predictions,
                        const std::map<std::string, std::string>& gold_charge_by_case,
                        const std::vector<std::string>& charge_order,
                        const std::vector<Strategy>& strategy_order, const std::string& model,
                        const std::string& template_version);

enum class ReportFormat { table, csv, json };

// Half-even decimal rounding of correct/total done in exact integer
// arithmetic; returns e.g. "0.6850" for (548, 800, 4).
std::string format_accuracy(long long correct, long long total, int decimals);

std::string emit_report(const EvalReport& report, ReportFormat format);
std::string emit_report(const EvalReport& report, const std::string& format);  // UnknownFormat

EvalReport report_from_json_file(const std::string& path);

// Multi-run comparison: one row block per report, a template version column
// appearing when the inputs disagree on it.
std::string render_comparison(const std::vector<EvalReport>& reports);

}  // namespace loteval
