#include "loteval/score.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace loteval {

std::string_view to_string(Category c) noexcept {
  switch (c) {
    case Category::correct:
      return "correct";
    case Category::wrong_charge:
      return "wrong_charge";
    case Category::over_split:
      return "over_split";
    case Category::no_charge:
      return "no_charge";
    case Category::unparsable:
      return "unparsable";
  }
  return "unparsable";
}

namespace {

constexpr std::array<Category, 5> kAllCategories = {Category::correct, Category::wrong_charge,
                                                    Category::over_split, Category::no_charge,
                                                    Category::unparsable};

}  // namespace

Verdict judge(const Prediction& prediction, const std::set<std::string>& gold, MatchMode mode) {
  if (gold.size() != 1) {
    throw std::invalid_argument("judge: gold must hold exactly one charge (case " +
                                prediction.case_id + ")");
  }
  Verdict v;
  v.case_id = prediction.case_id;
  v.strategy = prediction.strategy;
  v.article_mismatch = prediction.flags.count(PredictionFlag::article_mismatch) > 0;

  const std::set<std::string> predicted(prediction.charges.begin(), prediction.charges.end());
  const bool contains_gold = predicted.count(*gold.begin()) > 0;

  if (predicted.empty()) {
    const bool unusable = prediction.flags.count(PredictionFlag::truncated) > 0 ||
                          prediction.flags.count(PredictionFlag::unstructured) > 0;
    v.category = unusable ? Category::unparsable : Category::no_charge;
  } else if (predicted == gold) {
    v.category = Category::correct;
  } else if (contains_gold) {
    v.category = Category::over_split;
  } else {
    v.category = Category::wrong_charge;
  }
  v.correct = v.category == Category::correct ||
              (mode == MatchMode::contains_gold && v.category == Category::over_split);
  if (mode == MatchMode::contains_gold && v.category == Category::over_split) {
    v.category = Category::correct;
  }
  return v;
}

double micro_accuracy(const std::vector<Verdict>& verdicts) {
  if (verdicts.empty()) throw EmptyVerdicts();
  long long correct = 0;
  for (const auto& v : verdicts) correct += v.correct ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(verdicts.size());
}

std::map<std::string, double> per_charge_accuracy(
    const std::vector<Verdict>& verdicts,
    const std::map<std::string, std::string>& gold_charge_by_case) {
  std::map<std::string, std::pair<long long, long long>> tally;  // charge -> (correct, total)
  for (const auto& v : verdicts) {
    const auto it = gold_charge_by_case.find(v.case_id);
    if (it == gold_charge_by_case.end()) {
      throw AlignmentError("no gold charge for case " + v.case_id);
    }
    auto& [correct, total] = tally[it->second];
    total += 1;
    correct += v.correct ? 1 : 0;
  }
  std::map<std::string, double> out;
  for (const auto& [charge, counts] : tally) {
    out[charge] = static_cast<double>(counts.first) / static_cast<double>(counts.second);
  }
  return out;
}

std::map<Strategy, CategoryTally> error_taxonomy(const std::vector<Verdict>& verdicts,
                                                 const std::vector<Prediction>& predictions) {
  if (verdicts.size() != predictions.size()) {
    throw AlignmentError("verdict/prediction count mismatch: " +
                         std::to_string(verdicts.size()) + " vs " +
                         std::to_string(predictions.size()));
  }
  std::map<Strategy, CategoryTally> out;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const auto& v = verdicts[i];
    const auto& p = predictions[i];
    if (v.case_id != p.case_id || v.strategy != p.strategy) {
      throw AlignmentError("verdict " + v.case_id + "/" + std::string(to_string(v.strategy)) +
                           " paired with prediction " + p.case_id + "/" +
                           std::string(to_string(p.strategy)));
    }
    auto& tally = out[v.strategy];
    tally.categories[v.category] += 1;
    if (p.flags.count(PredictionFlag::article_mismatch)) tally.article_mismatch += 1;
  }
  return out;
}

EvalReport build_report(const std::vector<Verdict>& verdicts,
                        const std::vector<Prediction>& predictions,
                        const std::map<std::string, std::string>& gold_charge_by_case,
                        const std::vector<std::string>& charge_order,
                        const std::vector<Strategy>& strategy_order, const std::string& model,
                        const std::string& template_version) {
  const auto taxonomy = error_taxonomy(verdicts, predictions);

  EvalReport report;
  report.model = model;
  report.template_version = template_version;
  report.charges = charge_order;
  report.strategy_order = strategy_order;

  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    const auto& v = verdicts[i];
    const auto it = gold_charge_by_case.find(v.case_id);
    if (it == gold_charge_by_case.end()) {
      throw AlignmentError("no gold charge for case " + v.case_id);
    }
    auto& row = report.rows[v.strategy];
    row.total += 1;
    row.correct += v.correct ? 1 : 0;
    row.per_charge_total[it->second] += 1;
    row.per_charge_correct[it->second] += v.correct ? 1 : 0;
    const auto& p = predictions[i];
    row.usage.prompt_tokens += p.usage.prompt_tokens;
    row.usage.completion_tokens += p.usage.completion_tokens;
    if (p.usage.source == "live") row.usage.live_calls += 1;
    if (p.usage.source == "cache") row.usage.cache_hits += 1;
    if (p.usage.source == "replay") row.usage.replay_hits += 1;
  }
  for (const auto& [strategy, tally] : taxonomy) {
    auto& row = report.rows[strategy];
    row.categories = tally.categories;
    row.article_mismatch = tally.article_mismatch;
  }

  for (auto& [strategy, row] : report.rows) {
    long long across = 0;
    for (const auto& [charge, n] : row.per_charge_total) across += n;
    if (across != row.total) {
      throw AlignmentError("per-charge denominators do not sum to the strategy total");
    }
    long long categorized = 0;
    for (const auto& [category, n] : row.categories) categorized += n;
    if (categorized != row.total) {
      throw AlignmentError("category counts do not sum to the strategy total");
    }
  }
  return report;
}

std::string format_accuracy(long long correct, long long total, int decimals) {
  if (total <= 0) throw std::invalid_argument("format_accuracy: total must be > 0");
  if (correct < 0 || correct > total) {
    throw std::invalid_argument("format_accuracy: correct out of range");
  }
  long long scale = 1;
  for (int i = 0; i < decimals; ++i) scale *= 10;

  // Exact half-even rounding of the rational correct/total at `decimals`.
  const long long numerator = correct * scale;
  long long q = numerator / total;
  const long long r = numerator % total;
  if (2 * r > total || (2 * r == total && (q % 2) != 0)) q += 1;

  std::string frac = std::to_string(q % scale);
  if (static_cast<int>(frac.size()) < decimals) {
    frac.insert(0, decimals - frac.size(), '0');
  }
  std::string out = std::to_string(q / scale);
  if (decimals > 0) out += "." + frac;
  return out;
}

namespace {

std::string pad(const std::string& s, std::size_t width) {
  std::string out = s;
  if (out.size() < width) out.append(width - out.size(), ' ');
  return out;
}

std::string charge_cell(const StrategyStats& row, const std::string& charge) {
  const auto total = row.per_charge_total.find(charge);
  if (total == row.per_charge_total.end() || total->second == 0) return "-";
  const auto correct = row.per_charge_correct.find(charge);
  const long long c = correct == row.per_charge_correct.end() ? 0 : correct->second;
  return format_accuracy(c, total->second, 2);
}

std::string render_rows(const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> widths;
  for (const auto& row : rows) {
    if (widths.size() < row.size()) widths.resize(row.size(), 0);
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  std::ostringstream out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i + 1 < row.size()) {
        out << pad(row[i], widths[i]) << "  ";
      } else {
        out << row[i];
      }
    }
    out << '\n';
  }
  return out.str();
}

std::string charge_header(const EvalReport& report, const std::string& charge) {
  const auto it = report.charge_labels.find(charge);
  return it == report.charge_labels.end() || it->second.empty() ? charge : it->second;
}

std::string render_table(const EvalReport& report) {
  std::ostringstream out;
  out << "Model: " << report.model << "    Templates: " << report.template_version << "\n\n";

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"Strategy", "Total"};
  for (const auto& charge : report.charges) header.push_back(charge_header(report, charge));
  rows.push_back(header);
  for (const auto strategy : report.strategy_order) {
    const auto it = report.rows.find(strategy);
    if (it == report.rows.end()) continue;
    const auto& row = it->second;
    std::vector<std::string> cells = {std::string(to_string(strategy)),
                                      format_accuracy(row.correct, row.total, 4)};
    for (const auto& charge : report.charges) cells.push_back(charge_cell(row, charge));
    rows.push_back(std::move(cells));
  }
  out << render_rows(rows);

  out << "\nCategories\n";
  std::vector<std::vector<std::string>> tally_rows;
  std::vector<std::string> tally_header = {"Strategy"};
  for (const auto c : kAllCategories) tally_header.emplace_back(to_string(c));
  tally_header.emplace_back("article_mismatch");
  tally_rows.push_back(tally_header);
  for (const auto strategy : report.strategy_order) {
    const auto it = report.rows.find(strategy);
    if (it == report.rows.end()) continue;
    std::vector<std::string> cells = {std::string(to_string(strategy))};
    for (const auto c : kAllCategories) {
      const auto found = it->second.categories.find(c);
      cells.push_back(std::to_string(found == it->second.categories.end() ? 0 : found->second));
    }
    cells.push_back(std::to_string(it->second.article_mismatch));
    tally_rows.push_back(std::move(cells));
  }
  out << render_rows(tally_rows);

  if (!report.rows.empty()) {
    UsageTotals sum;
    for (const auto& [strategy, row] : report.rows) {
      sum.prompt_tokens += row.usage.prompt_tokens;
      sum.completion_tokens += row.usage.completion_tokens;
      sum.live_calls += row.usage.live_calls;
      sum.cache_hits += row.usage.cache_hits;
      sum.replay_hits += row.usage.replay_hits;
    }
    out << "\nUsage: " << sum.prompt_tokens << " prompt tokens, " << sum.completion_tokens
        << " completion tokens (" << sum.live_calls << " live, " << sum.cache_hits << " cached, "
        << sum.replay_hits << " replayed)\n";
  }
  return out.str();
}

std::string render_csv(const EvalReport& report) {
  std::ostringstream out;
  out << "model,strategy,total";
  for (const auto& charge : report.charges) out << ',' << charge;
  out << '\n';
  for (const auto strategy : report.strategy_order) {
    const auto it = report.rows.find(strategy);
    if (it == report.rows.end()) continue;
    const auto& row = it->second;
    out << report.model << ',' << to_string(strategy) << ','
        << format_accuracy(row.correct, row.total, 4);
    for (const auto& charge : report.charges) out << ',' << charge_cell(row, charge);
    out << '\n';
  }
  return out.str();
}

nlohmann::ordered_json usage_json(const UsageTotals& u) {
  nlohmann::ordered_json j;
  j["prompt_tokens"] = u.prompt_tokens;
  j["completion_tokens"] = u.completion_tokens;
  j["live_calls"] = u.live_calls;
  j["cache_hits"] = u.cache_hits;
  j["replay_hits"] = u.replay_hits;
  j["retries"] = u.retries;
  j["errors"] = u.errors;
  j["cache_corrupt"] = u.cache_corrupt;
  return j;
}

UsageTotals usage_from_json(const nlohmann::json& j) {
  UsageTotals u;
  u.prompt_tokens = j.value("prompt_tokens", 0LL);
  u.completion_tokens = j.value("completion_tokens", 0LL);
  u.live_calls = j.value("live_calls", 0LL);
  u.cache_hits = j.value("cache_hits", 0LL);
  u.replay_hits = j.value("replay_hits", 0LL);
  u.retries = j.value("retries", 0LL);
  u.errors = j.value("errors", 0LL);
  u.cache_corrupt = j.value("cache_corrupt", 0LL);
  return u;
}

std::string render_json(const EvalReport& report) {
  nlohmann::ordered_json doc;
  doc["model"] = report.model;
  doc["template_version"] = report.template_version;
  doc["charges"] = report.charges;
  doc["charge_labels"] = report.charge_labels;
  doc["strategies"] = nlohmann::ordered_json::array();
  for (const auto strategy : report.strategy_order) {
    const auto it = report.rows.find(strategy);
    if (it == report.rows.end()) continue;
    const auto& row = it->second;
    nlohmann::ordered_json entry;
    entry["strategy"] = to_string(strategy);
    entry["total"] = row.total;
    entry["correct"] = row.correct;
    entry["micro_accuracy"] =
        static_cast<double>(row.correct) / static_cast<double>(row.total);
    nlohmann::ordered_json per_charge;
    for (const auto& charge : report.charges) {
      const auto total = row.per_charge_total.find(charge);
      if (total == row.per_charge_total.end()) continue;
      const auto correct = row.per_charge_correct.find(charge);
      const long long c = correct == row.per_charge_correct.end() ? 0 : correct->second;
      nlohmann::ordered_json cell;
      cell["correct"] = c;
      cell["total"] = total->second;
      cell["accuracy"] = static_cast<double>(c) / static_cast<double>(total->second);
      per_charge[charge] = cell;
    }
    entry["per_charge"] = per_charge;
    nlohmann::ordered_json categories;
    for (const auto c : kAllCategories) {
      const auto found = row.categories.find(c);
      categories[std::string(to_string(c))] =
          found == row.categories.end() ? 0 : found->second;
    }
    entry["categories"] = categories;
    entry["article_mismatch"] = row.article_mismatch;
    entry["usage"] = usage_json(row.usage);
    doc["strategies"].push_back(entry);
  }
  return doc.dump(2) + "\n";
}

}  // namespace

std::string emit_report(const EvalReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::table:
      return render_table(report);
    case ReportFormat::csv:
      return render_csv(report);
    case ReportFormat::json:
      return render_json(report);
  }
  throw UnknownFormat("<enum out of range>");
}

std::string emit_report(const EvalReport& report, const std::string& format) {
  if (format == "table") return emit_report(report, ReportFormat::table);
  if (format == "csv") return emit_report(report, ReportFormat::csv);
  if (format == "json") return emit_report(report, ReportFormat::json);
  throw UnknownFormat(format);
}

EvalReport report_from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("report " + path + ": " + e.what());
  }
  EvalReport report;
  try {
    report.model = doc.at("model").get<std::string>();
    report.template_version = doc.at("template_version").get<std::string>();
    report.charges = doc.at("charges").get<std::vector<std::string>>();
    if (doc.contains("charge_labels")) {
      for (const auto& [k, v] : doc["charge_labels"].items()) {
        report.charge_labels[k] = v.get<std::string>();
      }
    }
    for (const auto& entry : doc.at("strategies")) {
      const auto strategy = strategy_from_string(entry.at("strategy").get<std::string>());
      if (!strategy) throw std::runtime_error("unknown strategy in " + path);
      report.strategy_order.push_back(*strategy);
      StrategyStats row;
      row.total = entry.at("total").get<long long>();
      row.correct = entry.at("correct").get<long long>();
      for (const auto& [charge, cell] : entry.at("per_charge").items()) {
        row.per_charge_total[charge] = cell.at("total").get<long long>();
        row.per_charge_correct[charge] = cell.at("correct").get<long long>();
      }
      for (const auto c : kAllCategories) {
        const std::string name(to_string(c));
        if (entry.at("categories").contains(name)) {
          row.categories[c] = entry["categories"][name].get<long long>();
        }
      }
      row.article_mismatch = entry.value("article_mismatch", 0LL);
      if (entry.contains("usage")) row.usage = usage_from_json(entry["usage"]);
      report.rows[*strategy] = std::move(row);
    }
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("report " + path + ": " + e.what());
  }
  return report;
}

std::string render_comparison(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw std::invalid_argument("no reports to compare");
  const auto& charges = reports.front().charges;
  for (const auto& r : reports) {
    if (r.charges != charges) {
      throw std::invalid_argument("reports disagree on charge columns");
    }
  }
  bool mixed_templates = false;
  for (const auto& r : reports) {
    if (r.template_version != reports.front().template_version) mixed_templates = true;
  }

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header = {"Model", "Strategy"};
  if (mixed_templates) header.emplace_back("Templates");
  header.emplace_back("Total");
  for (const auto& charge : charges) header.push_back(charge_header(reports.front(), charge));
  rows.push_back(header);

  for (const auto& report : reports) {
    bool first_row = true;
    for (const auto strategy : report.strategy_order) {
      const auto it = report.rows.find(strategy);
      if (it == report.rows.end()) continue;
      const auto& row = it->second;
      std::vector<std::string> cells;
      cells.push_back(first_row ? report.model : std::string());
      cells.emplace_back(to_string(strategy));
      if (mixed_templates) cells.push_back(report.template_version);
      cells.push_back(format_accuracy(row.correct, row.total, 4));
      for (const auto& charge : charges) cells.push_back(charge_cell(row, charge));
      rows.push_back(std::move(cells));
      first_row = false;
    }
  }
  return render_rows(rows);
}

}  // namespace loteval
