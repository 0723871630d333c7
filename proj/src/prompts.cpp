#include "loteval/prompts.hpp"

#include <fstream>

#include <json.hpp>

#include "loteval/corpus.hpp"
#include "loteval/digest.hpp"

namespace loteval {

namespace {

constexpr std::string_view kBaselineTemplate =
    "Case: {fact}\n"
    "\n"
    "Output the judgment of this case:";

constexpr std::string_view kZeroShotCotTemplate =
    "Case: {fact}\n"
    "\n"
    "Let us think step by step:";

constexpr std::string_view kLegalSyllogismTemplate =
    "In the legal syllogism, the major premise is the law article, the minor premise is the "
    "facts of the case, and the conclusion is the judgment of case.\n"
    "\n"
    "Case: {fact}\n"
    "\n"
    "Let us use legal syllogism to think and output the judgment:";

}  // namespace

std::string_view to_string(Strategy s) noexcept {
  switch (s) {
    case Strategy::baseline:
      return "Baseline";
    case Strategy::zero_shot_cot:
      return "ZeroShotCoT";
    case Strategy::legal_syllogism:
      return "LegalSyllogism";
  }
  return "Baseline";
}

std::optional<Strategy> strategy_from_string(std::string_view name) noexcept {
  if (name == "Baseline") return Strategy::baseline;
  if (name == "ZeroShotCoT") return Strategy::zero_shot_cot;
  if (name == "LegalSyllogism") return Strategy::legal_syllogism;
  return std::nullopt;
}

TemplateSet TemplateSet::defaults() {
  TemplateSet t;
  t.set(Strategy::baseline, std::string(kBaselineTemplate));
  t.set(Strategy::zero_shot_cot, std::string(kZeroShotCotTemplate));
  t.set(Strategy::legal_syllogism, std::string(kLegalSyllogismTemplate));
  t.finalize();
  return t;
}

TemplateSet TemplateSet::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound(path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("template file " + path + ": " + e.what());
  }
  if (!doc.is_object()) throw std::runtime_error("template file must be a JSON object");

  std::array<std::optional<std::string>, 3> overrides;
  for (const auto& [key, value] : doc.items()) {
    const auto s = strategy_from_string(key);
    if (!s) throw UnknownStrategyKey(key);
    overrides[static_cast<std::size_t>(*s)] = value.get<std::string>();
  }
  return from_overrides(overrides);
}

TemplateSet TemplateSet::from_overrides(
    const std::array<std::optional<std::string>, 3>& overrides) {
  TemplateSet t = defaults();
  for (Strategy s : kAllStrategies) {
    const auto& o = overrides[static_cast<std::size_t>(s)];
    if (o) t.set(s, *o);
  }
  t.finalize();
  return t;
}

void TemplateSet::set(Strategy s, std::string tmpl) {
  const auto first = tmpl.find(kPlaceholder);
  if (first == std::string::npos ||
      tmpl.find(kPlaceholder, first + kPlaceholder.size()) != std::string::npos) {
    throw MissingPlaceholder(std::string(to_string(s)));
  }
  Slot& slot = slots_[static_cast<std::size_t>(s)];
  slot.prefix = tmpl.substr(0, first);
  slot.suffix = tmpl.substr(first + kPlaceholder.size());
  slot.raw = std::move(tmpl);
}

void TemplateSet::finalize() {
  CanonicalEncoder enc;
  for (Strategy s : kAllStrategies) {
    enc.field(to_string(s), std::string_view(slots_[static_cast<std::size_t>(s)].raw));
  }
  version_ = enc.sha256().substr(0, 12);
}

PromptBundle TemplateSet::render(Strategy s, std::string_view fact,
                                 std::string_view case_id) const {
  if (trim(fact).empty()) throw EmptyFact();
  const Slot& slot = slots_[static_cast<std::size_t>(s)];
  PromptBundle bundle;
  bundle.case_id = std::string(case_id);
  bundle.strategy = s;
  bundle.template_version = version_;
  bundle.text.reserve(slot.prefix.size() + fact.size() + slot.suffix.size());
  bundle.text.append(slot.prefix);
  bundle.text.append(fact);
  bundle.text.append(slot.suffix);
  return bundle;
}

const std::string& TemplateSet::raw(Strategy s) const {
  return slots_[static_cast<std::size_t>(s)].raw;
}

}  // namespace loteval
